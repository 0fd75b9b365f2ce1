"""Summaries of finished (or partial) runs."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import ManifestError
from .experiment import MANIFEST, RECORDS, read_manifest
from .metrics import METRICS, best_by_generation, emit_plot_series, first_accuracy_drop, read_csv

DEFAULT_THRESHOLDS = (0.03, 0.10)


@dataclass
class RunSummary:
    label: str
    mode: str
    records: list
    crossings: dict

    def table(self) -> str:
        lines = [f"run: {self.label} (mode {self.mode})",
                 f"{'gen':>4} {'best_id':>10} {'accuracy':>9} {'synapses':>9} {'kernels':>8} "
                 f"{'syn_eff':>9} {'clu_eff':>9}"]
        for r in best_by_generation(self.records):
            lines.append(f"{r.generation:>4} {r.offspring_id:>10} {r.accuracy:>9.4f} {r.synapse_count:>9d} "
                         f"{r.kernel_count:>8d} {r.synaptic_efficiency:>9.2f} {r.cluster_efficiency:>9.2f}")
        for drop, gen in self.crossings.items():
            where = f"generation {gen}" if gen is not None else "not reached"
            lines.append(f"accuracy drop >= {drop * 100:g}%: {where}")
        return "\n".join(lines)


def find_runs(path) -> list[Path]:
    """``path`` itself if it is a run directory, else its immediate run subdirectories."""
    path = Path(path)
    if not path.is_dir():
        raise ManifestError(f"{path}: not a directory")
    if (path / MANIFEST).exists():
        return [path]
    runs = sorted(p for p in path.iterdir() if (p / MANIFEST).exists())
    if not runs:
        raise ManifestError(f"{path}: no run manifest found")
    return runs


def summarize_run(run_dir, thresholds=DEFAULT_THRESHOLDS) -> RunSummary:
    run_dir = Path(run_dir)
    manifest = read_manifest(run_dir)
    if not (run_dir / RECORDS).exists():
        raise ManifestError(f"{run_dir}: manifest present but {RECORDS} missing")
    try:
        records = read_csv(run_dir / RECORDS)
    except Exception as exc:
        raise ManifestError(f"{run_dir / RECORDS}: {exc}") from None
    crossings = {t: first_accuracy_drop(records, t) for t in thresholds}
    return RunSummary(run_dir.name, manifest.get("mode", "?"), records, crossings)


def report(path, thresholds=DEFAULT_THRESHOLDS, figures=True) -> list[RunSummary]:
    """Summaries for every run under ``path``; writes series files and figures."""
    summaries = []
    for run_dir in find_runs(path):
        s = summarize_run(run_dir, thresholds)
        series = run_dir / "series"
        series.mkdir(exist_ok=True)
        for metric in METRICS:
            emit_plot_series(s.records, metric, series / f"{metric}.txt")
        summaries.append(s)
    if figures:
        from .plotting import plot_trajectories

        root = Path(path)
        runs = {f"{s.label} ({s.mode})" if s.mode not in s.label else s.label: s.records for s in summaries}
        first = min(thresholds) if thresholds else None
        markers = {}
        for (label, _), s in zip(runs.items(), summaries):
            if first is not None and s.crossings.get(first) is not None:
                markers[label] = s.crossings[first]
        plot_trajectories(runs, root / "figures", markers)
    return summaries
