"""End-to-end runs: the proposed construction + hybrid selection pipeline and
the heuristic baseline it is compared against."""

from __future__ import annotations

import logging
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import plots
from .config import Settings
from .errors import ConfigError, DataError, ScadaFSError, StageError
from .features import build_moving_stats, construct_all, moving_id, moving_stat
from .filters import FeatureRanking, rank_features, select_candidates, write_rankings
from .metrics import ConfusionMatrix, MetricsReport, compute_metrics, confusion, format_metric, write_report
from .mlp import ScanResult, TrainedModel, predict, read_model, scan_architectures, write_model
from .sbfs import (
    SearchTrace,
    SubsetEvaluation,
    SubsetEvaluator,
    cap_normal_rows,
    floating_backward_search,
    read_id_list,
    write_subset,
    write_trace,
)
from .scada import (
    ORIGINAL_CHANNELS,
    FeatureDescriptor,
    FeatureMatrix,
    LabeledDataset,
    align_status_labels,
    chronological_split,
    ingest_csv,
    read_catalog,
    read_feature_csv,
    read_status_csv,
    write_catalog,
    write_feature_csv,
)

logger = logging.getLogger(__name__)

SAMPLE_PERIOD_MINUTES = 10
HEURISTIC_WINDOW = 6  # 60 min

HEURISTIC_FEATURES = (
    "wind_speed_min",
    "wind_speed_avg",
    "rotor_speed_min",
    "rotor_speed_avg",
    "power_min",
    "power_max",
    "temp_gen_rotor",
    "temp_gen_stator",
    moving_id("temp_gen_stator", "moving_var", HEURISTIC_WINDOW),
    moving_id("temp_gen_rotor", "moving_var", HEURISTIC_WINDOW),
)

COMPARISON_METRICS = ("recall", "precision", "f_score", "false_alarm_minutes")


class Artifacts:
    """Tracks files written into one run directory."""

    def __init__(self, root, stamp: str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.stamp = stamp
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.root / name
        self.written.append(p)
        return p

    def mark_failed(self) -> None:
        for p in self.written:
            if p.exists():
                p.replace(p.with_name(p.name + ".failed"))


@contextmanager
def stage(name: str, artifacts: Artifacts | None = None):
    t0 = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except (ScadaFSError, OSError, ValueError) as exc:
        if artifacts is not None:
            artifacts.mark_failed()
        raise StageError(name, exc) from exc
    logger.info("stage %s finished in %.1f s", name, time.perf_counter() - t0)


@dataclass
class RunResult:
    output_dir: Path
    candidates: list[str]
    best: SubsetEvaluation
    trace: SearchTrace
    model: TrainedModel
    confusion: ConfusionMatrix
    report: MetricsReport
    rankings: list[FeatureRanking] = field(default_factory=list)
    scan: list[ScanResult] = field(default_factory=list)
    train: LabeledDataset | None = field(default=None, repr=False)
    test: LabeledDataset | None = field(default=None, repr=False)
    n_test_rows: int = 0
    n_evaluated: int = 0

    @property
    def subset(self) -> tuple[str, ...]:
        return self.best.subset


def load_labeled(settings: Settings, artifacts: Artifacts | None = None):
    with stage("ingest", artifacts):
        if not settings["data"] or not settings["status"]:
            raise ConfigError("both data and status CSV paths are required")
        table = ingest_csv(settings["data"], ORIGINAL_CHANNELS)
        events = read_status_csv(settings["status"])
    with stage("align", artifacts):
        ds = align_status_labels(table, events)
    return table, ds


def inner_split(ds: LabeledDataset, validation_fraction: float, feature_ids: Sequence[str]):
    """Chronological fit/validation parts of a training set, rows with missing inputs dropped."""
    X = ds.features.select(feature_ids).data
    cut = int(math.floor((1 - validation_fraction) * len(ds)))
    parts = []
    for rows in (np.arange(cut), np.arange(cut, len(ds))):
        ok = rows[~np.isnan(X[rows]).any(axis=1)]
        parts.append((X[ok], ds.labels[ok]))
    return parts


def fit_final_model(train: LabeledDataset, subset: Sequence[str], settings: Settings):
    """Architecture scan on training rows only: fit on the inner-train part,
    choose on the inner-validation part."""
    (Xf, yf), (Xv, yv) = inner_split(train, settings["wrapper.validation_fraction"], subset)
    keep = cap_normal_rows(yf, settings["final.max_normal_rows"], settings.seed)
    Xf, yf = Xf[keep], yf[keep]
    return scan_architectures(
        Xf,
        yf,
        (Xv, yv),
        settings["final.hidden_sizes"],
        settings["final.activations"],
        settings.final_training(),
        feature_ids=subset,
    )


def evaluate_model(model: TrainedModel, test: LabeledDataset):
    """Confusion counts on test rows whose model inputs are complete."""
    X = test.features.select(model.feature_ids).data
    ok = ~np.isnan(X).any(axis=1)
    _, pred = predict(model, X[ok])
    cm = confusion(pred, test.labels[ok])
    return cm, compute_metrics(cm, SAMPLE_PERIOD_MINUTES), int(ok.sum())


def write_scan(results: Sequence[ScanResult], path, comment=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("n_hidden\tactivation\tf_score\tval_loss\n")
        for r in results:
            fh.write(f"{r.n_hidden}\t{r.activation}\t{format_metric(r.f_score)}\t{r.val_loss!r}\n")


def _search_train_evaluate(
    train: LabeledDataset,
    test: LabeledDataset,
    candidates: Sequence[str],
    settings: Settings,
    artifacts: Artifacts,
    floating: bool | None = None,
):
    figures = settings["report.figures"]
    with stage("select", artifacts):
        evaluator = SubsetEvaluator(
            train,
            settings.wrapper_training(),
            n_hidden=settings["wrapper.n_hidden"],
            activation=settings["wrapper.activation"],
            validation_fraction=settings["wrapper.validation_fraction"],
            max_normal_rows=settings["wrapper.max_normal_rows"],
        )
        min_size = min(settings["wrapper.min_size"], len(candidates))
        use_floating = settings["wrapper.floating"] if floating is None else floating
        best, trace = floating_backward_search(candidates, evaluator, min_size, use_floating)
        logger.info(
            "search: %d subsets trained, cache hit rate %.2f, best %s (%.4f)",
            trace.evaluations, trace.cache_hit_rate, ",".join(best.subset), best.criterion,
        )
        write_subset(best.subset, artifacts.path("subset.txt"), artifacts.stamp)
        write_trace(trace, artifacts.path("trace.tsv"), artifacts.stamp)
        if figures:
            plots.plot_trace(trace.steps, artifacts.path("trace.png"))
    with stage("train", artifacts):
        model, scan = fit_final_model(train, best.subset, settings)
        write_model(model, artifacts.path("model.txt"), artifacts.stamp)
        write_scan(scan, artifacts.path("scan.tsv"), artifacts.stamp)
    with stage("evaluate", artifacts):
        cm, report, n_eval = evaluate_model(model, test)
        extra = {"tp": cm.tp, "tn": cm.tn, "fp": cm.fp, "fn": cm.fn, "test_rows": len(test), "evaluated_rows": n_eval}
        write_report(report, artifacts.path("report.tsv"), artifacts.stamp, extra)
        if figures:
            plots.plot_metrics(report, artifacts.path("metrics.png"))
    return best, trace, model, scan, cm, report, n_eval


def run_pipeline(settings: Settings, output_dir=None) -> RunResult:
    """ingest, align, construct, split, rank, select, train, evaluate."""
    out = Artifacts(output_dir or settings["output_dir"], settings.stamp())
    table, ds = load_labeled(settings, out)
    with stage("construct", out):
        ds = ds.with_features(construct_all(table, settings.construction()))
        write_catalog(ds.features.catalog, out.path("catalog.txt"), out.stamp)
        if settings["report.feature_table"]:
            write_feature_csv(ds, out.path("features.csv"), out.stamp)
    with stage("split", out):
        train, test = chronological_split(ds, settings["split.train_fraction"])
    with stage("rank", out):
        rankings = [
            rank_features(train.features, train.labels, m, settings.relief(), settings["filter.mi_bins"])
            for m in settings["filter.methods"]
        ]
        candidates = select_candidates(rankings, settings["filter.k_per_method"])
        write_rankings(rankings, out.path("rankings.tsv"), out.stamp)
        write_subset(candidates, out.path("candidates.txt"), out.stamp)
        if settings["report.figures"]:
            plots.plot_rankings(rankings, out.path("rankings.png"), top=settings["filter.k_per_method"])
    best, trace, model, scan, cm, report, n_eval = _search_train_evaluate(train, test, candidates, settings, out)
    return RunResult(out.root, candidates, best, trace, model, cm, report, rankings, scan, train, test, len(test), n_eval)


def heuristic_matrix(ds: LabeledDataset) -> FeatureMatrix:
    """Original channels plus 60-min moving variances of both generator temperatures."""
    originals = ds.features
    extra = []
    for c in ("temp_gen_stator", "temp_gen_rotor"):
        extra.append(
            FeatureMatrix(
                [FeatureDescriptor(moving_id(c, "moving_var", HEURISTIC_WINDOW), "moving_stat", f"60-min trailing variance of {c}")],
                moving_stat(originals.column(c), HEURISTIC_WINDOW, "moving_var")[:, None],
            )
        )
    return FeatureMatrix.hstack([originals, *extra])


def run_heuristic(settings: Settings, output_dir=None, floating: bool | None = None) -> RunResult:
    """Fixed expert feature list, refined by the same backward floating search."""
    out = Artifacts(output_dir or Path(settings["output_dir"]) / "heuristic", settings.stamp())
    _, ds = load_labeled(settings, out)
    with stage("construct", out):
        ds = ds.with_features(heuristic_matrix(ds))
        write_catalog(ds.features.select(HEURISTIC_FEATURES).catalog, out.path("catalog.txt"), out.stamp)
    with stage("split", out):
        train, test = chronological_split(ds, settings["split.train_fraction"])
    candidates = list(HEURISTIC_FEATURES)
    best, trace, model, scan, cm, report, n_eval = _search_train_evaluate(
        train, test, candidates, settings, out, floating
    )
    return RunResult(out.root, candidates, best, trace, model, cm, report, [], scan, train, test, len(test), n_eval)


@dataclass
class Comparison:
    proposed: RunResult
    heuristic: RunResult

    def rows(self) -> list[tuple[str, list[str]]]:
        return [
            (name, [format_metric(getattr(r.report, m)) for m in COMPARISON_METRICS])
            for name, r in (("proposed", self.proposed), ("heuristic", self.heuristic))
        ]

    def table(self) -> str:
        lines = ["method\t" + "\t".join(COMPARISON_METRICS)]
        lines += [name + "\t" + "\t".join(vals) for name, vals in self.rows()]
        return "\n".join(lines) + "\n"


def run_comparison(settings: Settings) -> Comparison:
    root = Path(settings["output_dir"])
    proposed = run_pipeline(settings, root / "proposed")
    heuristic = run_heuristic(settings, root / "heuristic")
    cmp = Comparison(proposed, heuristic)
    with open(root / "comparison.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {settings.stamp()}\n")
        fh.write(cmp.table())
    if settings["report.figures"]:
        plots.plot_comparison({"proposed": proposed.report, "heuristic": heuristic.report}, root / "comparison.png")
    return cmp


# Standalone stages. Each reads the persisted outputs of the previous stage
# from the run directory, so any one can be re-run on its own.


def _run_dir(settings: Settings) -> Artifacts:
    return Artifacts(settings["output_dir"], settings.stamp())


def load_constructed(settings: Settings) -> LabeledDataset:
    root = Path(settings["output_dir"])
    for name in ("catalog.txt", "features.csv"):
        if not (root / name).exists():
            raise DataError(f"{root / name} not found; run 'construct' first")
    return read_feature_csv(root / "features.csv", read_catalog(root / "catalog.txt"))


def construct_stage(settings: Settings) -> LabeledDataset:
    out = _run_dir(settings)
    if not settings["data"] or not settings["status"]:
        raise ConfigError("both data and status CSV paths are required")
    table = ingest_csv(settings["data"], ORIGINAL_CHANNELS)
    ds = align_status_labels(table, read_status_csv(settings["status"]))
    ds = ds.with_features(construct_all(table, settings.construction()))
    write_catalog(ds.features.catalog, out.path("catalog.txt"), out.stamp)
    write_feature_csv(ds, out.path("features.csv"), out.stamp)
    return ds


def rank_stage(settings: Settings) -> list[str]:
    out = _run_dir(settings)
    train, _ = chronological_split(load_constructed(settings), settings["split.train_fraction"])
    rankings = [
        rank_features(train.features, train.labels, m, settings.relief(), settings["filter.mi_bins"])
        for m in settings["filter.methods"]
    ]
    candidates = select_candidates(rankings, settings["filter.k_per_method"])
    write_rankings(rankings, out.path("rankings.tsv"), out.stamp)
    write_subset(candidates, out.path("candidates.txt"), out.stamp)
    if settings["report.figures"]:
        plots.plot_rankings(rankings, out.path("rankings.png"), top=settings["filter.k_per_method"])
    return candidates


def _read_list(settings: Settings, name: str, producer: str) -> list[str]:
    p = Path(settings["output_dir"]) / name
    if not p.exists():
        raise DataError(f"{p} not found; run '{producer}' first")
    ids = read_id_list(p)
    if not ids:
        raise DataError(f"{p} is empty")
    return ids


def select_stage(settings: Settings) -> SubsetEvaluation:
    out = _run_dir(settings)
    candidates = _read_list(settings, "candidates.txt", "rank")
    train, _ = chronological_split(load_constructed(settings), settings["split.train_fraction"])
    evaluator = SubsetEvaluator(
        train,
        settings.wrapper_training(),
        n_hidden=settings["wrapper.n_hidden"],
        activation=settings["wrapper.activation"],
        validation_fraction=settings["wrapper.validation_fraction"],
        max_normal_rows=settings["wrapper.max_normal_rows"],
    )
    min_size = min(settings["wrapper.min_size"], len(candidates))
    best, trace = floating_backward_search(candidates, evaluator, min_size, settings["wrapper.floating"])
    write_subset(best.subset, out.path("subset.txt"), out.stamp)
    write_trace(trace, out.path("trace.tsv"), out.stamp)
    if settings["report.figures"]:
        plots.plot_trace(trace.steps, out.path("trace.png"))
    return best


def train_stage(settings: Settings) -> TrainedModel:
    out = _run_dir(settings)
    subset = _read_list(settings, "subset.txt", "select")
    train, _ = chronological_split(load_constructed(settings), settings["split.train_fraction"])
    model, scan = fit_final_model(train, subset, settings)
    write_model(model, out.path("model.txt"), out.stamp)
    write_scan(scan, out.path("scan.tsv"), out.stamp)
    return model


def evaluate_stage(settings: Settings) -> MetricsReport:
    out = _run_dir(settings)
    p = Path(settings["output_dir"]) / "model.txt"
    if not p.exists():
        raise DataError(f"{p} not found; run 'train' first")
    model = read_model(p)
    _, test = chronological_split(load_constructed(settings), settings["split.train_fraction"])
    cm, report, n_eval = evaluate_model(model, test)
    extra = {"tp": cm.tp, "tn": cm.tn, "fp": cm.fp, "fn": cm.fn, "test_rows": len(test), "evaluated_rows": n_eval}
    write_report(report, out.path("report.tsv"), out.stamp, extra)
    if settings["report.figures"]:
        plots.plot_metrics(report, out.path("metrics.png"))
    return report
