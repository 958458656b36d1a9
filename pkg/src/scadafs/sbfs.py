"""Wrapper subset evaluation and Sequential Backward Floating Search."""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DataError, ParseError
from .metrics import ConfusionMatrix, confusion, f_score
from .mlp import MlpArchitecture, TrainingConfig, predict, train
from .scada import LabeledDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SubsetEvaluation:
    subset: tuple[str, ...]
    criterion: float
    degenerate: bool = False
    restart_index: int = -1
    confusion: ConfusionMatrix | None = None

    def __post_init__(self):
        object.__setattr__(self, "subset", tuple(self.subset))
        if not self.subset:
            raise ConfigError("subset must be non-empty")


@dataclass(frozen=True)
class TraceStep:
    step: int
    action: str  # start | remove | conditional_include
    feature: str
    criterion: float
    subset: tuple[str, ...]
    probes: int  # subsets scored to choose this step


@dataclass
class SearchTrace:
    steps: list[TraceStep] = field(default_factory=list)
    best_per_size: dict[int, SubsetEvaluation] = field(default_factory=dict)
    evaluations: int = 0
    cache_hits: int = 0
    rejected_probes: int = 0  # subsets scored by re-inclusion checks that did not fire

    @property
    def probes(self) -> int:
        """Criterion calls made by the search."""
        return sum(s.probes for s in self.steps) + self.rejected_probes

    @property
    def cache_hit_rate(self) -> float:
        total = self.evaluations + self.cache_hits
        return self.cache_hits / total if total else 0.0


def subset_seed(master_seed: int, subset: Sequence[str]) -> int:
    digest = hashlib.sha256(f"{master_seed}|{'|'.join(sorted(subset))}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def cap_normal_rows(labels: np.ndarray, max_normal_rows: int | None, seed: int) -> np.ndarray:
    """Row indices keeping every fault row and at most ``max_normal_rows``
    normal rows, drawn once from a seed-derived stream."""
    rows = np.arange(len(labels))
    normals = np.flatnonzero(labels == 0)
    if max_normal_rows is None or len(normals) <= max_normal_rows:
        return rows
    rng = np.random.default_rng([seed, 0xCAB])
    keep = rng.choice(normals, size=max_normal_rows, replace=False)
    return np.sort(np.concatenate([keep, np.flatnonzero(labels != 0)]))


class SubsetEvaluator:
    """Scores a feature subset by the inner-validation F-score of a fixed MLP.

    The training rows are split chronologically into inner-train and
    inner-validation parts. ``max_normal_rows`` optionally caps the normal
    rows used for fitting (every fault row is kept); the same rows are used
    for every subset. Results are cached by the sorted subset.
    """

    def __init__(
        self,
        train_ds: LabeledDataset,
        cfg: TrainingConfig = TrainingConfig(),
        n_hidden: int = 10,
        activation: str = "tanh",
        validation_fraction: float = 0.2,
        max_normal_rows: int | None = None,
    ):
        if not 0 < validation_fraction < 1:
            raise ConfigError("validation_fraction must be in (0, 1)")
        self.train_ds = train_ds
        self.cfg = cfg
        self.n_hidden = n_hidden
        self.activation = activation
        n = len(train_ds)
        cut = int(math.floor((1 - validation_fraction) * n))
        self._fit_rows = cap_normal_rows(train_ds.labels[:cut], max_normal_rows, cfg.seed)
        self._val_rows = np.arange(cut, n)
        self._cache: dict[tuple[str, ...], SubsetEvaluation] = {}
        self.evaluations = 0
        self.cache_hits = 0

    def __call__(self, subset: Sequence[str]) -> SubsetEvaluation:
        key = tuple(sorted(subset))
        if not key:
            raise ConfigError("subset must be non-empty")
        hit = self._cache.get(key)
        if hit is not None:
            self.cache_hits += 1
            return replace(hit, subset=tuple(subset))
        self.evaluations += 1
        result = self._evaluate(key)
        self._cache[key] = result
        return replace(result, subset=tuple(subset))

    def _evaluate(self, key: tuple[str, ...]) -> SubsetEvaluation:
        X = self.train_ds.features.select(key).data
        y = self.train_ds.labels
        parts = []
        for rows in (self._fit_rows, self._val_rows):
            ok = rows[~np.isnan(X[rows]).any(axis=1)]
            parts.append((X[ok], y[ok]))
        (Xf, yf), (Xv, yv) = parts
        if len(np.unique(yf)) < 2 or len(np.unique(yv)) < 2:
            return SubsetEvaluation(key, 0.0, degenerate=True)
        cfg = replace(self.cfg, seed=subset_seed(self.cfg.seed, key))
        arch = MlpArchitecture(len(key), self.n_hidden, self.activation)
        try:
            model = train(Xf, yf, arch, cfg, validation=(Xv, yv), feature_ids=key)
        except DataError:
            return SubsetEvaluation(key, 0.0, degenerate=True)
        _, pred = predict(model, Xv)
        cm = confusion(pred, yv)
        f = f_score(cm)
        return SubsetEvaluation(key, 0.0 if f is None else float(f), False, model.restart_index, cm)


def _as_evaluation(result, subset) -> SubsetEvaluation:
    if isinstance(result, SubsetEvaluation):
        return result
    return SubsetEvaluation(tuple(subset), float(result))


def _better_final(a: SubsetEvaluation, b: SubsetEvaluation) -> bool:
    """True if ``a`` beats ``b``: higher criterion, then smaller, then lexicographically first."""
    if a.criterion != b.criterion:
        return a.criterion > b.criterion
    if len(a.subset) != len(b.subset):
        return len(a.subset) < len(b.subset)
    return sorted(a.subset) < sorted(b.subset)


def floating_backward_search(
    candidates: Sequence[str],
    criterion: Callable[[tuple[str, ...]], SubsetEvaluation | float],
    min_size: int = 1,
    floating: bool = True,
) -> tuple[SubsetEvaluation, SearchTrace]:
    """Backward elimination from the full candidate set, with conditional
    re-inclusions when ``floating`` is set.

    Each exclusion drops the feature whose removal leaves the best subset
    (ties drop the later candidate). After each exclusion, previously dropped
    features are re-included one at a time for as long as the best
    re-inclusion strictly beats the best subset recorded at that size (ties
    pick the earlier candidate). Returns the best subset over all sizes.
    """
    candidates = list(dict.fromkeys(candidates))
    if not candidates:
        raise ConfigError("no candidates to search")
    if not 1 <= min_size <= len(candidates):
        raise ConfigError(f"min_size {min_size} outside [1, {len(candidates)}]")
    pos = {f: i for i, f in enumerate(candidates)}
    trace = SearchTrace()

    def ordered(fs):
        return tuple(sorted(fs, key=pos.__getitem__))

    def score(fs):
        return _as_evaluation(criterion(fs), fs)

    def record(ev):
        k = len(ev.subset)
        if k not in trace.best_per_size or ev.criterion > trace.best_per_size[k].criterion:
            trace.best_per_size[k] = ev

    current = ordered(candidates)
    ev = score(current)
    record(ev)
    trace.steps.append(TraceStep(0, "start", "", ev.criterion, current, 1))

    while len(current) > min_size:
        choice = None
        for f in reversed(current):
            e = score(ordered(g for g in current if g != f))
            if choice is None or e.criterion > choice[1].criterion:
                choice = (f, e)
        f, e = choice
        current = e.subset
        record(e)
        trace.steps.append(TraceStep(len(trace.steps), "remove", f, e.criterion, current, len(current) + 1))

        while floating and len(current) < len(candidates):
            excluded = [g for g in candidates if g not in current]
            choice = None
            for g in excluded:
                e = score(ordered((*current, g)))
                if choice is None or e.criterion > choice[1].criterion:
                    choice = (g, e)
            g, e = choice
            if e.criterion > trace.best_per_size[len(e.subset)].criterion:
                current = e.subset
                trace.best_per_size[len(current)] = e
                trace.steps.append(
                    TraceStep(len(trace.steps), "conditional_include", g, e.criterion, current, len(excluded))
                )
            else:
                trace.rejected_probes += len(excluded)
                break

    best = None
    for ev in trace.best_per_size.values():
        if best is None or _better_final(ev, best):
            best = ev
    if isinstance(criterion, SubsetEvaluator):
        trace.evaluations = criterion.evaluations
        trace.cache_hits = criterion.cache_hits
    return best, trace


def sbfs_search(
    candidates: Sequence[str],
    train_ds: LabeledDataset,
    cfg: TrainingConfig = TrainingConfig(),
    min_size: int = 2,
    evaluator: SubsetEvaluator | None = None,
    floating: bool = True,
    **evaluator_options,
) -> tuple[SubsetEvaluation, SearchTrace]:
    evaluator = evaluator or SubsetEvaluator(train_ds, cfg, **evaluator_options)
    best, trace = floating_backward_search(candidates, evaluator, min_size, floating)
    logger.info(
        "search done: %d subsets trained, cache hit rate %.2f, best %s (%.4f)",
        trace.evaluations, trace.cache_hit_rate, ",".join(best.subset), best.criterion,
    )
    return best, trace


def replay(candidates: Sequence[str], steps: Sequence[TraceStep]) -> list[tuple[str, ...]]:
    """Subsets produced by applying the trace actions to the full candidate set."""
    candidates = list(dict.fromkeys(candidates))
    pos = {f: i for i, f in enumerate(candidates)}
    current = set(candidates)
    out = []
    for s in steps:
        if s.action == "remove":
            if s.feature not in current:
                raise DataError(f"step {s.step} removes absent feature '{s.feature}'")
            current.discard(s.feature)
        elif s.action == "conditional_include":
            if s.feature in current:
                raise DataError(f"step {s.step} re-includes present feature '{s.feature}'")
            current.add(s.feature)
        elif s.action != "start":
            raise DataError(f"unknown trace action '{s.action}'")
        out.append(tuple(sorted(current, key=pos.__getitem__)))
    return out


def write_subset(subset: Sequence[str], path, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for f in subset:
            fh.write(f + "\n")


def read_id_list(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]


def write_trace(trace: SearchTrace, path, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("step\taction\tfeature\tcriterion\tsize\tprobes\tsubset\n")
        for s in trace.steps:
            fh.write(
                f"{s.step}\t{s.action}\t{s.feature}\t{s.criterion!r}\t{len(s.subset)}\t{s.probes}\t{','.join(s.subset)}\n"
            )


def read_trace(path) -> list[TraceStep]:
    steps = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.startswith("#") or line.startswith("step\t") or not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 7:
                raise ParseError("trace lines need 7 tab-separated fields", line=lineno)
            steps.append(
                TraceStep(int(parts[0]), parts[1], parts[2], float(parts[3]), tuple(parts[6].split(",")), int(parts[5]))
            )
    return steps
