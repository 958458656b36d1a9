"""Filter rankings: Fisher score, Relief, mutual information, point-biserial
correlation, and the top-k candidate union handed to the wrapper search."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateLabelsError, InsufficientClassSupport, ParseError
from .scada import FeatureMatrix

logger = logging.getLogger(__name__)

METHODS = ("fisher", "relief", "mutual_info", "correlation")
MI_BINS = 16


@dataclass(frozen=True)
class FeatureRanking:
    method: str
    feature_ids: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown ranking method '{self.method}'")
        object.__setattr__(self, "feature_ids", tuple(self.feature_ids))
        scores = np.array(self.scores, dtype=np.float64)
        if scores.shape != (len(self.feature_ids),):
            raise ConfigError("one score per feature required")
        if np.isnan(scores).any():
            raise ConfigError("scores must not be NaN")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    @property
    def order(self) -> list[str]:
        """Ids by descending score; ties keep catalog order."""
        idx = np.lexsort((np.arange(len(self.scores)), -self.scores))
        return [self.feature_ids[i] for i in idx]

    def score_of(self, feature_id: str) -> float:
        return float(self.scores[self.feature_ids.index(feature_id)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.feature_ids, self.scores.tolist()))


@dataclass(frozen=True)
class ReliefConfig:
    n_samples: int = 200
    sampling: str = "stratified"
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError("Relief needs at least one sampled instance")
        if self.sampling not in ("uniform", "stratified"):
            raise ConfigError(f"unknown Relief sampling '{self.sampling}'")


def _as_arrays(X, y):
    data = X.data if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    ids = X.ids if isinstance(X, FeatureMatrix) else [f"f{j}" for j in range(data.shape[1])]
    y = np.asarray(y).astype(np.int64)
    if len(y) != data.shape[0]:
        raise ConfigError("labels and rows differ in length")
    return data, ids, y


def _require_two_classes(y):
    if len(np.unique(y)) < 2:
        raise DegenerateLabelsError()


def fisher_score(X, y) -> FeatureRanking:
    """Between-class scatter of class means over pooled within-class variance.

    Both terms weight class k by its size n_k; variances are population
    variances. Missing cells drop out of their own feature only. Zero
    within-class variance scores +inf when the means differ, 0 otherwise.
    """
    data, ids, y = _as_arrays(X, y)
    _require_two_classes(y)
    present = ~np.isnan(data)
    filled = np.where(present, data, 0.0)
    n_total = present.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = filled.sum(axis=0) / n_total
        between = np.zeros(data.shape[1])
        within = np.zeros(data.shape[1])
        n_classes_present = np.zeros(data.shape[1], dtype=int)
        for k in np.unique(y):
            rows = y == k
            pk = present[rows]
            nk = pk.sum(axis=0)
            mk = filled[rows].sum(axis=0) / nk
            dev = np.where(pk, data[rows] - mk, 0.0)
            vk = (dev**2).sum(axis=0) / nk
            has = nk > 0
            n_classes_present += has
            between += np.where(has, nk * (mk - mu) ** 2, 0.0)
            within += np.where(has, nk * vk, 0.0)
        scores = between / within
    lo = np.where(present, data, np.inf).min(axis=0)
    hi = np.where(present, data, -np.inf).max(axis=0)
    constant = ~(hi > lo)
    scores[(within == 0) & (between > 0)] = np.inf
    scores[(within == 0) & (between == 0)] = 0.0
    scores[constant | (n_classes_present < 2)] = 0.0
    return FeatureRanking("fisher", ids, scores)


def scale_for_relief(data: np.ndarray) -> np.ndarray:
    """Min-max scale each column to [0, 1]; missing cells take the column's scaled median."""
    present = ~np.isnan(data)
    lo = np.where(present, data, np.inf).min(axis=0)
    hi = np.where(present, data, -np.inf).max(axis=0)
    span = hi - lo
    ok = np.isfinite(span) & (span > 0)
    with np.errstate(invalid="ignore"):
        z = np.where(ok, (data - np.where(ok, lo, 0.0)) / np.where(ok, span, 1.0), 0.0)
    if not present.all():
        med = np.nanmedian(np.where(present, z, np.nan), axis=0)
        med = np.where(np.isnan(med), 0.0, med)
        z = np.where(present, z, med)
    return z


def relief_sample(y: np.ndarray, cfg: ReliefConfig) -> np.ndarray:
    """Row indices of the instances Relief visits (sorted)."""
    n = len(y)
    if cfg.n_samples >= n:
        return np.arange(n)
    rng = np.random.default_rng([cfg.seed, 0x4E11EF])
    if cfg.sampling == "uniform":
        return np.sort(rng.choice(n, size=cfg.n_samples, replace=False))
    classes, counts = np.unique(y, return_counts=True)
    share = cfg.n_samples * counts / n
    take = np.maximum(1, np.floor(share).astype(int))
    # hand out what is left by largest remainder, then trim from the largest class
    for i in np.argsort(-(share - np.floor(share)), kind="stable"):
        if take.sum() >= cfg.n_samples:
            break
        take[i] += 1
    while take.sum() > cfg.n_samples:
        take[int(np.argmax(take))] -= 1
    take = np.minimum(take, counts)
    picked = [rng.choice(np.flatnonzero(y == k), size=m, replace=False) for k, m in zip(classes, take)]
    return np.sort(np.concatenate(picked))


def relief_neighbors(z: np.ndarray, y: np.ndarray, sample: np.ndarray):
    """Nearest hit and nearest miss (Euclidean, lowest row index on ties) per sampled row."""
    hits = np.empty(len(sample), dtype=np.int64)
    misses = np.empty(len(sample), dtype=np.int64)
    members = {k: np.flatnonzero(y == k) for k in np.unique(y)}
    others = {k: np.flatnonzero(y != k) for k in members}
    for s, t in enumerate(sample):
        d = ((z - z[t]) ** 2).sum(axis=1)
        d[t] = np.inf
        same, other = members[y[t]], others[y[t]]
        hits[s] = same[np.argmin(d[same])]
        misses[s] = other[np.argmin(d[other])]
    return hits, misses


def relief_score(X, y, cfg: ReliefConfig = ReliefConfig()) -> FeatureRanking:
    """Half the summed (miss distance - hit distance) per feature over the sampled rows."""
    data, ids, y = _as_arrays(X, y)
    counts = np.unique(y, return_counts=True)[1]
    if len(counts) < 2 or counts.min() < 2:
        raise InsufficientClassSupport()
    z = scale_for_relief(data)
    sample = relief_sample(y, cfg)
    hits, misses = relief_neighbors(z, y, sample)
    scores = 0.5 * (np.abs(z[sample] - z[misses]) - np.abs(z[sample] - z[hits])).sum(axis=0)
    return FeatureRanking("relief", ids, scores)


def mutual_information_score(X, y, bins: int = MI_BINS) -> FeatureRanking:
    """Plug-in MI (nats) between the label and the feature cut into equal-width bins."""
    data, ids, y = _as_arrays(X, y)
    classes = np.unique(y)
    scores = np.zeros(data.shape[1])
    for j in range(data.shape[1]):
        col = data[:, j]
        keep = ~np.isnan(col)
        x, lab = col[keep], y[keep]
        if x.size == 0:
            continue
        lo, hi = x.min(), x.max()
        if not hi > lo:
            continue
        b = np.minimum(((x - lo) / (hi - lo) * bins).astype(np.int64), bins - 1)
        c = np.searchsorted(classes, lab)
        joint = np.zeros((bins, len(classes)))
        np.add.at(joint, (b, c), 1.0)
        joint /= x.size
        pb = joint.sum(axis=1, keepdims=True)
        pc = joint.sum(axis=0, keepdims=True)
        nz = joint > 0
        scores[j] = max(0.0, float((joint[nz] * np.log(joint[nz] / (pb @ pc)[nz])).sum()))
    return FeatureRanking("mutual_info", ids, scores)


def correlation_score(X, y) -> FeatureRanking:
    """|point-biserial correlation| with the label; zero-variance features score 0."""
    data, ids, y = _as_arrays(X, y)
    scores = np.zeros(data.shape[1])
    yf = y.astype(np.float64)
    for j in range(data.shape[1]):
        col = data[:, j]
        keep = ~np.isnan(col)
        x, lab = col[keep], yf[keep]
        if x.size < 2:
            continue
        dx, dy = x - x.mean(), lab - lab.mean()
        sxx, syy = (dx * dx).sum(), (dy * dy).sum()
        if sxx <= 0 or syy <= 0:
            continue
        scores[j] = min(1.0, abs(float((dx * dy).sum()) / np.sqrt(sxx * syy)))
    return FeatureRanking("correlation", ids, scores)


def rank_features(X, y, method: str, relief: ReliefConfig = ReliefConfig(), mi_bins: int = MI_BINS) -> FeatureRanking:
    if method == "fisher":
        return fisher_score(X, y)
    if method == "relief":
        return relief_score(X, y, relief)
    if method == "mutual_info":
        return mutual_information_score(X, y, mi_bins)
    if method == "correlation":
        return correlation_score(X, y)
    raise ConfigError(f"unknown ranking method '{method}'")


def select_candidates(rankings: Sequence[FeatureRanking], k_per_method: int = 15) -> list[str]:
    """Union of each ranking's top k, ordered by best rank across methods then catalog index."""
    rankings = list(rankings)
    if not rankings:
        raise ConfigError("no rankings to select from")
    if k_per_method < 1:
        raise ConfigError("k_per_method must be positive")
    catalog = rankings[0].feature_ids
    if k_per_method > len(catalog):
        logger.warning("k_per_method %d exceeds %d features; clamped", k_per_method, len(catalog))
        k_per_method = len(catalog)
    best: dict[str, int] = {}
    for r in rankings:
        for pos, fid in enumerate(r.order[:k_per_method]):
            best[fid] = min(pos, best.get(fid, pos))
    index = {fid: i for i, fid in enumerate(catalog)}
    return sorted(best, key=lambda f: (best[f], index[f]))


def write_rankings(rankings: Sequence[FeatureRanking], path, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for r in rankings:
            scores = r.as_dict()
            for pos, fid in enumerate(r.order, 1):
                fh.write(f"{pos}\t{fid}\t{r.method}\t{scores[fid]!r}\n")


def read_rankings(path) -> list[FeatureRanking]:
    """Read a ranking file; feature_ids come back in rank order, which
    preserves each ranking's ``order``."""
    by_method: dict[str, list[tuple[int, str, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.startswith("#") or not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise ParseError("ranking lines need rank, feature_id, method, score", line=lineno)
            by_method.setdefault(parts[2], []).append((int(parts[0]), parts[1], float(parts[3])))
    out = []
    for method, rows in by_method.items():
        rows.sort()
        out.append(FeatureRanking(method, [r[1] for r in rows], [r[2] for r in rows]))
    return out
