import json

import pytest

from evosynth.config import ExperimentConfig, config_from_dict, load_config
from evosynth.errors import ConfigError, ManifestError
from evosynth.experiment import evolve, read_manifest, run_train_ancestor
from evosynth.metrics import read_csv
from evosynth.report import report, summarize_run

TOY = {
    "dataset": {"source": "blobs", "classes": 3, "samples": 150, "image_size": 12, "noise": 0.1},
    "architecture": {"conv1_filters": 2, "conv2_filters": 3, "kernel_size": 3, "hidden_units": 8},
    "trainer": {"epochs": 2, "batch_size": 16},
    "generations": 3,
    "seed": 5,
}


def toy_config(tmp_path, name="run", **changes):
    data = json.loads(json.dumps(TOY))
    data.update(changes)
    data["output_dir"] = str(tmp_path / name)
    return config_from_dict(data)


def strip_duration(path):
    return [r.__dict__ | {"duration": 0.0} for r in read_csv(path)]


class TestConfig:
    def test_defaults(self):
        cfg = config_from_dict({})
        assert cfg == ExperimentConfig()
        assert cfg.environment.budget_fraction == 0.7 and cfg.encoding.truncation_step == 0.1
        assert cfg.mating.alpha_cluster == 0.5 and cfg.population.offspring_per_generation == 2

    @pytest.mark.parametrize("data, key", [
        ({"environment": {"budget_fraction": 1.5}}, "environment.budget_fraction"),
        ({"encoding": {"truncation_step": 0}}, "encoding.truncation_step"),
        ({"trainer": {"batch_size": "big"}}, "trainer.batch_size"),
        ({"mating": {"alpha_cluster": -1}}, "mating.alpha_cluster"),
        ({"population": {"offspring_per_generation": 0}}, "population.offspring_per_generation"),
        ({"generations": 0}, "generations"),
        ({"seed": -1}, "seed"),
        ({"mode": "clonal"}, "mode"),
        ({"dataset": {"sauce": "mnist"}}, "dataset.sauce"),
        ({"bogus": 1}, "bogus"),
    ])
    def test_validation_names_key(self, data, key):
        with pytest.raises(ConfigError) as info:
            config_from_dict(data)
        assert info.value.key == key

    def test_sexual_needs_population_two(self):
        with pytest.raises(ConfigError, match="population.offspring_per_generation"):
            config_from_dict({"mode": "sexual", "population": {"offspring_per_generation": 1}})

    def test_relative_paths_resolve_against_config(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"dataset": {"path": "mnist"}, "ancestor_genomes": ["a.genome"]}))
        cfg = load_config(tmp_path / "c.json")
        assert cfg.dataset.path == str(tmp_path / "mnist")
        assert cfg.ancestor_genomes == (str(tmp_path / "a.genome"),)


class TestEvolve:
    def test_three_generation_run(self, tmp_path):
        cfg = toy_config(tmp_path)
        manifest = evolve(cfg)
        assert manifest["status"] == "complete" and manifest["completed_generations"] == 3
        records = read_csv(tmp_path / "run" / "records.csv")
        assert sorted({r.generation for r in records}) == [1, 2, 3]
        assert [r.generation for r in records].count(2) == 2
        ancestor = [r for r in records if r.generation == 1][0]
        assert ancestor.synaptic_efficiency == 1.0 and ancestor.cluster_efficiency == 1.0
        for g in (2, 3):
            assert (tmp_path / "run" / "genomes" / f"g{g:03d}" / f"g{g:03d}-o00.genome").exists()
        assert (tmp_path / "run" / "series" / "accuracy.txt").exists()

    def test_repeat_is_identical(self, tmp_path):
        evolve(toy_config(tmp_path, "a"))
        evolve(toy_config(tmp_path, "b"))
        assert strip_duration(tmp_path / "a" / "records.csv") == strip_duration(tmp_path / "b" / "records.csv")
        for f in (tmp_path / "a" / "genomes").rglob("*.genome"):
            assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()

    def test_resume_matches_uninterrupted(self, tmp_path):
        evolve(toy_config(tmp_path, "full", generations=4))

        def stop(gen, _records):
            if gen == 2:
                raise KeyboardInterrupt

        with pytest.raises(KeyboardInterrupt):
            evolve(toy_config(tmp_path, "cut", generations=4), on_generation=stop)
        assert read_manifest(tmp_path / "cut")["completed_generations"] == 2
        evolve(toy_config(tmp_path, "cut", generations=4))
        assert strip_duration(tmp_path / "full" / "records.csv") == strip_duration(tmp_path / "cut" / "records.csv")

    def test_resume_with_different_config_rejected(self, tmp_path):
        evolve(toy_config(tmp_path, "r", generations=2))
        with pytest.raises(ConfigError, match="output_dir"):
            evolve(toy_config(tmp_path, "r", generations=3, seed=6))

    def test_extend_finished_run(self, tmp_path):
        evolve(toy_config(tmp_path, "x", generations=2))
        manifest = evolve(toy_config(tmp_path, "x", generations=3))
        assert manifest["completed_generations"] == 3

    def test_sexual_run(self, tmp_path):
        evolve(toy_config(tmp_path, "s", mode="sexual"))
        records = read_csv(tmp_path / "s" / "records.csv")
        assert all(len(r.lineage) == 2 for r in records if r.generation == 3)

    def test_pretrained_ancestor(self, tmp_path):
        cfg = toy_config(tmp_path, "anc")
        manifest = run_train_ancestor(cfg)
        path = tmp_path / "anc" / manifest["ancestors"][0]["genome"]
        again = run_train_ancestor(toy_config(tmp_path, "anc2"))
        assert path.read_bytes() == (tmp_path / "anc2" / again["ancestors"][0]["genome"]).read_bytes()
        data = json.loads(json.dumps(TOY)) | {"ancestor_genomes": [str(path)], "output_dir": str(tmp_path / "e")}
        evolve(config_from_dict(data))
        inline = toy_config(tmp_path, "inline")
        evolve(inline)
        assert strip_duration(tmp_path / "e" / "records.csv") == strip_duration(tmp_path / "inline" / "records.csv")


class TestReport:
    def test_table_matches_csv(self, tmp_path):
        evolve(toy_config(tmp_path))
        (summary,) = report(tmp_path / "run", figures=True)
        table = summary.table()
        for r in read_csv(tmp_path / "run" / "records.csv"):
            if r.generation == 1:
                assert f"{r.accuracy:.4f}" in table and str(r.synapse_count) in table
        assert (tmp_path / "run" / "figures" / "accuracy.png").stat().st_size > 0
        assert (tmp_path / "run" / "figures" / "synaptic_efficiency.png").exists()

    def test_multiple_runs(self, tmp_path):
        evolve(toy_config(tmp_path, "runs/a", generations=2))
        evolve(toy_config(tmp_path, "runs/b", generations=2, mode="sexual"))
        summaries = report(tmp_path / "runs")
        assert [s.mode for s in summaries] == ["asexual", "sexual"]

    def test_empty_directory(self, tmp_path):
        with pytest.raises(ManifestError):
            report(tmp_path)

    def test_corrupt_manifest(self, tmp_path):
        (tmp_path / "manifest.json").write_text("{not json")
        with pytest.raises(ManifestError):
            summarize_run(tmp_path)
