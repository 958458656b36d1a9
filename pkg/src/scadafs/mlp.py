"""Single-hidden-layer feedforward classifier trained by full-batch gradient
descent with momentum on class-weighted binary cross-entropy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DataError, DegenerateLabelsError, ParseError
from .metrics import confusion, f_score
from .scada import FeatureMatrix

ACTIVATIONS = ("logistic", "tanh")
EPS = 1e-12


@dataclass(frozen=True)
class MlpArchitecture:
    n_inputs: int
    n_hidden: int = 10
    hidden_activation: str = "tanh"
    min_hidden: int = 2
    max_hidden: int = 15

    def __post_init__(self):
        if self.n_inputs < 1:
            raise ConfigError("n_inputs must be positive")
        if not self.min_hidden <= self.n_hidden <= self.max_hidden:
            raise ConfigError(
                f"n_hidden {self.n_hidden} outside [{self.min_hidden}, {self.max_hidden}]"
            )
        if self.hidden_activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation '{self.hidden_activation}'")

    @property
    def output_activation(self) -> str:
        return "logistic"

    @property
    def n_params(self) -> int:
        return self.n_inputs * self.n_hidden + 2 * self.n_hidden + 1


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    max_epochs: int = 500
    patience: int = 20
    restarts: int = 3
    seed: int = 0
    class_weighting: str = "inverse_frequency"
    decision_threshold: float = 0.5

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must be in [0, 1)")
        if self.max_epochs < 1 or self.patience < 1 or self.restarts < 1:
            raise ConfigError("max_epochs, patience and restarts must be positive")
        if self.class_weighting not in ("none", "inverse_frequency"):
            raise ConfigError(f"unknown class_weighting '{self.class_weighting}'")
        if not 0 < self.decision_threshold < 1:
            raise ConfigError("decision_threshold must be in (0, 1)")


@dataclass(frozen=True, eq=False)
class TrainedModel:
    architecture: MlpArchitecture
    feature_ids: tuple[str, ...]
    W1: np.ndarray  # (n_inputs, n_hidden)
    b1: np.ndarray  # (n_hidden,)
    w2: np.ndarray  # (n_hidden,)
    b2: float
    mean: np.ndarray
    std: np.ndarray
    decision_threshold: float = 0.5
    seed: int = 0
    restart_index: int = 0
    epochs_run: int = 0
    best_loss: float = math.nan
    loss_history: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        a = self.architecture
        object.__setattr__(self, "feature_ids", tuple(self.feature_ids))
        for name, shape in (
            ("W1", (a.n_inputs, a.n_hidden)),
            ("b1", (a.n_hidden,)),
            ("w2", (a.n_hidden,)),
            ("mean", (a.n_inputs,)),
            ("std", (a.n_inputs,)),
        ):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ConfigError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if len(self.feature_ids) != a.n_inputs:
            raise ConfigError("one feature id per input required")
        if not (self.std > 0).all():
            raise ConfigError("standardization stds must be > 0")
        object.__setattr__(self, "b2", float(self.b2))

    def __eq__(self, other):
        if not isinstance(other, TrainedModel):
            return NotImplemented
        arrays = ("W1", "b1", "w2", "mean", "std")
        scalars = ("architecture", "feature_ids", "b2", "decision_threshold", "seed", "restart_index", "epochs_run")
        return (
            all(getattr(self, k) == getattr(other, k) for k in scalars)
            and all(np.array_equal(getattr(self, k), getattr(other, k)) for k in arrays)
            and (self.best_loss == other.best_loss or (math.isnan(self.best_loss) and math.isnan(other.best_loss)))
        )

    __hash__ = None

    def params(self) -> np.ndarray:
        return pack(self.W1, self.b1, self.w2, self.b2)

    def with_params(self, theta: np.ndarray) -> TrainedModel:
        W1, b1, w2, b2 = unpack(theta, self.architecture)
        return TrainedModel(
            self.architecture, self.feature_ids, W1, b1, w2, b2, self.mean, self.std,
            self.decision_threshold, self.seed, self.restart_index, self.epochs_run, self.best_loss,
        )

    def standardize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


def pack(W1, b1, w2, b2) -> np.ndarray:
    return np.concatenate([np.ravel(W1), np.ravel(b1), np.ravel(w2), [float(b2)]])


def unpack(theta: np.ndarray, arch: MlpArchitecture):
    n, h = arch.n_inputs, arch.n_hidden
    W1 = theta[: n * h].reshape(n, h)
    b1 = theta[n * h: n * h + h]
    w2 = theta[n * h + h: n * h + 2 * h]
    return W1, b1, w2, float(theta[-1])


def _activate(a, kind):
    return np.tanh(a) if kind == "tanh" else expit(a)


def _activation_slope(h, kind):
    return 1.0 - h * h if kind == "tanh" else h * (1.0 - h)


def _forward(theta, Z, arch):
    W1, b1, w2, b2 = unpack(theta, arch)
    hidden = _activate(Z @ W1 + b1, arch.hidden_activation)
    return hidden, expit(hidden @ w2 + b2)


def _bce(p, y, weights):
    pc = np.clip(p, EPS, 1 - EPS)
    per_row = -(y * np.log(pc) + (1 - y) * np.log1p(-pc))
    return float((weights * per_row).sum() / len(y))


def _loss_grad(theta, Z, y, weights, arch):
    hidden, p = _forward(theta, Z, arch)
    loss = _bce(p, y, weights)
    W1, b1, w2, b2 = unpack(theta, arch)
    d_out = weights * (p - y) / len(y)
    d_hidden = np.outer(d_out, w2) * _activation_slope(hidden, arch.hidden_activation)
    grad = pack(Z.T @ d_hidden, d_hidden.sum(axis=0), hidden.T @ d_out, d_out.sum())
    return loss, grad


def class_weights(y, scheme: str = "inverse_frequency") -> tuple[float, float]:
    """Per-class loss weights (w0, w1); inverse frequency gives each class equal total weight."""
    y = np.asarray(y)
    if scheme == "none":
        return 1.0, 1.0
    n, n1 = len(y), int((y == 1).sum())
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        raise DegenerateLabelsError()
    return n / (2.0 * n0), n / (2.0 * n1)


def _row_weights(y, cw):
    return np.where(np.asarray(y) == 1, cw[1], cw[0])


def _matrix(X) -> tuple[np.ndarray, tuple[str, ...] | None]:
    if isinstance(X, FeatureMatrix):
        return X.data, tuple(X.ids)
    return np.asarray(X, dtype=np.float64), None


def loss_and_gradient(model: TrainedModel, X, y, class_weights=(1.0, 1.0)) -> tuple[float, np.ndarray]:
    """Class-weighted mean cross-entropy and its gradient w.r.t. all weights and biases
    (flattened as W1, b1, w2, b2)."""
    data, _ = _matrix(X)
    y = np.asarray(y, dtype=np.float64)
    Z = model.standardize(data)
    return _loss_grad(model.params(), Z, y, _row_weights(y, class_weights), model.architecture)


def _init_params(arch, rng):
    bound_in = 1.0 / math.sqrt(arch.n_inputs)
    bound_hidden = 1.0 / math.sqrt(arch.n_hidden)
    W1 = rng.uniform(-bound_in, bound_in, (arch.n_inputs, arch.n_hidden))
    b1 = rng.uniform(-bound_in, bound_in, arch.n_hidden)
    w2 = rng.uniform(-bound_hidden, bound_hidden, arch.n_hidden)
    b2 = rng.uniform(-bound_hidden, bound_hidden)
    return pack(W1, b1, w2, b2)


def _fit_once(theta, Z, y, weights, arch, cfg, val):
    velocity = np.zeros_like(theta)
    best_loss, best_theta, since = math.inf, theta.copy(), 0
    history = []
    epochs = 0
    for epoch in range(cfg.max_epochs):
        epochs = epoch + 1
        loss, grad = _loss_grad(theta, Z, y, weights, arch)
        monitor = loss if val is None else _bce(_forward(theta, val[0], arch)[1], val[1], val[2])
        if not (math.isfinite(loss) and math.isfinite(monitor) and np.isfinite(grad).all()):
            return None
        history.append(loss)
        if monitor < best_loss:
            best_loss, best_theta, since = monitor, theta.copy(), 0
        else:
            since += 1
            if since >= cfg.patience:
                break
        velocity = cfg.momentum * velocity - cfg.learning_rate * grad
        theta = theta + velocity
    return best_theta, best_loss, epochs, history


def train(
    X,
    y,
    arch: MlpArchitecture,
    cfg: TrainingConfig = TrainingConfig(),
    validation: tuple | None = None,
    feature_ids: Sequence[str] | None = None,
) -> TrainedModel:
    """Fit ``cfg.restarts`` random initialisations and keep the one with the lowest
    validation loss (training loss when no validation set is given).

    ``validation`` is an optional (X_val, y_val) pair. Inputs must be complete.
    """
    data, ids = _matrix(X)
    ids = tuple(feature_ids) if feature_ids is not None else ids
    if ids is None:
        ids = tuple(f"x{j}" for j in range(data.shape[1]))
    y = np.asarray(y, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != arch.n_inputs:
        raise ConfigError(f"expected {arch.n_inputs} input columns, got {data.shape}")
    if np.isnan(data).any():
        raise DataError("training inputs contain missing cells")
    if len(np.unique(y)) < 2:
        raise DegenerateLabelsError()
    cw = class_weights(y, cfg.class_weighting)
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    Z = (data - mean) / std
    weights = _row_weights(y, cw)
    val = None
    if validation is not None:
        vdata, _ = _matrix(validation[0])
        if np.isnan(vdata).any():
            raise DataError("validation inputs contain missing cells")
        vy = np.asarray(validation[1], dtype=np.float64)
        val = ((vdata - mean) / std, vy, _row_weights(vy, cw))

    best = None
    for r in range(cfg.restarts):
        rng = np.random.default_rng([cfg.seed, r])
        fitted = _fit_once(_init_params(arch, rng), Z, y, weights, arch, cfg, val)
        if fitted is None:
            continue
        theta, loss, epochs, history = fitted
        if best is None or loss < best[1]:
            best = (theta, loss, epochs, history, r)
    if best is None:
        raise DataError("training diverged in every restart")
    theta, loss, epochs, history, r = best
    W1, b1, w2, b2 = unpack(theta, arch)
    return TrainedModel(
        arch, ids, W1, b1, w2, b2, mean, std, cfg.decision_threshold, cfg.seed, r, epochs, loss, tuple(history)
    )


def predict(model: TrainedModel, X) -> tuple[np.ndarray, np.ndarray]:
    data, ids = _matrix(X)
    if ids is not None and ids != model.feature_ids:
        for i, fid in enumerate(ids):
            if i >= len(model.feature_ids) or fid != model.feature_ids[i]:
                raise ConfigError(f"column mismatch at '{fid}'")
        raise ConfigError(f"column mismatch: missing '{model.feature_ids[len(ids)]}'")
    if data.shape[1] != model.architecture.n_inputs:
        raise ConfigError(f"expected {model.architecture.n_inputs} columns, got {data.shape[1]}")
    _, scores = _forward(model.params(), model.standardize(data), model.architecture)
    return scores, (scores >= model.decision_threshold).astype(np.int8)


@dataclass(frozen=True)
class ScanResult:
    n_hidden: int
    activation: str
    f_score: float | None
    val_loss: float
    model: TrainedModel = field(repr=False)


def scan_architectures(
    X,
    y,
    validation: tuple,
    hidden_sizes: Sequence[int] = tuple(range(2, 16)),
    activations: Sequence[str] = ACTIVATIONS,
    cfg: TrainingConfig = TrainingConfig(),
    feature_ids: Sequence[str] | None = None,
) -> tuple[TrainedModel, list[ScanResult]]:
    """Train every (hidden size, activation) pair; pick the best validation F-score,
    then lower validation loss, then the smaller network."""
    data, ids = _matrix(X)
    results = []
    for act in activations:
        for h in hidden_sizes:
            arch = MlpArchitecture(data.shape[1], h, act, min_hidden=min(2, h), max_hidden=max(15, h))
            model = train(data, y, arch, cfg, validation, feature_ids or ids)
            _, pred = predict(model, _matrix(validation[0])[0])
            cm = confusion(pred, np.asarray(validation[1]).astype(np.int8))
            results.append(ScanResult(h, act, f_score(cm), model.best_loss, model))

    def key(r):
        f = -1.0 if r.f_score is None else r.f_score
        return (-f, r.val_loss, r.n_hidden, ACTIVATIONS.index(r.activation))

    best = min(results, key=key)
    return best.model, results


# --------------------------------------------------------------------------
# persistence


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_model(model: TrainedModel, path, comment: str | None = None) -> None:
    a = model.architecture
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines += [
        "format scadafs-mlp-1",
        f"n_inputs {a.n_inputs}",
        f"n_hidden {a.n_hidden}",
        f"hidden_activation {a.hidden_activation}",
        f"output_activation {a.output_activation}",
        f"decision_threshold {_fmt(model.decision_threshold)}",
        f"seed {model.seed}",
        f"restart_index {model.restart_index}",
        f"epochs_run {model.epochs_run}",
        f"best_loss {_fmt(model.best_loss)}",
        "features " + " ".join(model.feature_ids),
        "mean " + " ".join(map(_fmt, model.mean)),
        "std " + " ".join(map(_fmt, model.std)),
        "b1 " + " ".join(map(_fmt, model.b1)),
        "w2 " + " ".join(map(_fmt, model.w2)),
        f"b2 {_fmt(model.b2)}",
        "W1",
    ]
    lines += [" ".join(map(_fmt, row)) for row in model.W1]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    header: dict[str, str] = {}
    try:
        w1_at = lines.index("W1")
    except ValueError:
        raise ParseError("model file lacks a W1 block") from None
    for ln in lines[:w1_at]:
        key, _, value = ln.partition(" ")
        header[key] = value
    if header.get("format") != "scadafs-mlp-1":
        raise ParseError("not a scadafs model file")
    try:
        arch = MlpArchitecture(
            int(header["n_inputs"]),
            int(header["n_hidden"]),
            header["hidden_activation"],
            min_hidden=min(2, int(header["n_hidden"])),
            max_hidden=max(15, int(header["n_hidden"])),
        )

        def vec(key):
            return np.array([float(v) for v in header[key].split()])

        W1 = np.array([[float(v) for v in ln.split()] for ln in lines[w1_at + 1:] if ln.strip()])
        return TrainedModel(
            arch,
            header["features"].split(),
            W1.reshape(arch.n_inputs, arch.n_hidden),
            vec("b1"),
            vec("w2"),
            float(header["b2"]),
            vec("mean"),
            vec("std"),
            float(header["decision_threshold"]),
            int(header["seed"]),
            int(header["restart_index"]),
            int(header["epochs_run"]),
            float(header["best_loss"]),
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"malformed model file: {exc}") from None
