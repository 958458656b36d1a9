"""Plain-text ``key = value`` configuration with dotted section prefixes.

Every key has a typed default; files and command-line flags override them.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

from .errors import ConfigError
from .features import STATS, ConstructionConfig, KnowledgeConfig
from .filters import METHODS, MI_BINS, ReliefConfig
from .mlp import ACTIVATIONS, TrainingConfig
from .scada import ORIGINAL_CHANNELS, PERIOD_SECONDS, TIMESTAMP_FORMAT
from .synthgen import FaultEpisode, SynthConfig, plan_fault_episodes


def _int_list(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _str_list(text):
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _bool(text):
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_int(text):
    return None if text.strip().lower() in ("", "none", "all") else int(text)


def _str(text):
    return text.strip()


_TRAINING_KEYS = {
    "learning_rate": float,
    "momentum": float,
    "max_epochs": int,
    "patience": int,
    "restarts": int,
    "class_weighting": _str,
    "decision_threshold": float,
}

# key: (parser, default text)
SCHEMA: dict[str, tuple] = {
    "data": (_str, ""),
    "status": (_str, ""),
    "output_dir": (_str, "run"),
    "seed": (int, "0"),
    "split.train_fraction": (float, "0.7"),
    "construction.lag_steps": (_int_list, "1,2,3,4,5,6"),
    "construction.stat_windows": (_int_list, "20,30,60"),
    "construction.stats": (_str_list, ",".join(STATS)),
    "construction.air_density": (float, "1.225"),
    "construction.swept_area": (float, repr(math.pi * 26.0**2)),
    "filter.methods": (_str_list, "fisher,relief"),
    "filter.k_per_method": (int, "15"),
    "filter.relief_samples": (int, "200"),
    "filter.relief_sampling": (_str, "stratified"),
    "filter.mi_bins": (int, str(MI_BINS)),
    "wrapper.learning_rate": (float, "0.1"),
    "wrapper.momentum": (float, "0.9"),
    "wrapper.max_epochs": (int, "200"),
    "wrapper.patience": (int, "20"),
    "wrapper.restarts": (int, "1"),
    "wrapper.class_weighting": (_str, "inverse_frequency"),
    "wrapper.decision_threshold": (float, "0.5"),
    "wrapper.n_hidden": (int, "10"),
    "wrapper.activation": (_str, "tanh"),
    "wrapper.min_size": (int, "2"),
    "wrapper.validation_fraction": (float, "0.2"),
    "wrapper.max_normal_rows": (_optional_int, "2000"),
    "wrapper.floating": (_bool, "true"),
    "final.hidden_sizes": (_int_list, "2-15"),
    "final.activations": (_str_list, ",".join(ACTIVATIONS)),
    "final.learning_rate": (float, "0.1"),
    "final.momentum": (float, "0.9"),
    "final.max_epochs": (int, "300"),
    "final.patience": (int, "20"),
    "final.restarts": (int, "3"),
    "final.class_weighting": (_str, "inverse_frequency"),
    "final.decision_threshold": (float, "0.5"),
    "final.max_normal_rows": (_optional_int, "4000"),
    "report.figures": (_bool, "true"),
    "report.feature_table": (_bool, "false"),
    "synth.seed": (_optional_int, "none"),
    "synth.n_rows": (int, "20000"),
    "synth.rated_power": (float, "900"),
    "synth.rotor_diameter": (float, "52"),
    "synth.weibull_shape": (float, "2.0"),
    "synth.weibull_scale": (float, "8.0"),
    "synth.fault_episodes": (_str, ""),
    "synth.fault_count": (int, "20"),
    "synth.fault_min_rows": (int, "4"),
    "synth.fault_max_rows": (int, "12"),
    "synth.fault_severity_min": (float, "12"),
    "synth.fault_severity_max": (float, "25"),
    "synth.missing_probability": (float, "0"),
    "synth.start_time": (_str, "2015-01-01T00:00:00"),
}
for _c in ORIGINAL_CHANNELS:
    SCHEMA[f"synth.noise_scale.{_c}"] = (float, "1.0")

PATH_KEYS = ("data", "status", "output_dir")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}'")
        raw[key] = value.strip()
    return raw


def load_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), str(path))


@dataclass(frozen=True)
class Settings:
    """Fully resolved, typed configuration values keyed by dotted name."""

    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def resolve(cls, *layers: dict[str, str]) -> Settings:
        merged = {k: default for k, (_, default) in SCHEMA.items()}
        for layer in layers:
            for k, v in layer.items():
                if k not in SCHEMA:
                    raise ConfigError(f"unknown key '{k}'")
                merged[k] = str(v)
        typed = {}
        for k, text in merged.items():
            try:
                typed[k] = SCHEMA[k][0](text)
            except ValueError as exc:
                raise ConfigError(f"bad value for '{k}': {exc}") from None
        settings = cls(typed)
        settings.validate()
        return settings

    def canonical_text(self) -> str:
        lines = []
        for k in sorted(self.values):
            if k in PATH_KEYS:
                continue
            v = self.values[k]
            if isinstance(v, tuple):
                v = ",".join(map(str, v))
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def stamp(self) -> str:
        return f"master_seed={self.seed} config_digest={self.digest}"

    def validate(self) -> None:
        if not 0 < self["split.train_fraction"] < 1:
            raise ConfigError("split.train_fraction must be in (0, 1)")
        bad = set(self["filter.methods"]) - set(METHODS)
        if bad or not self["filter.methods"]:
            raise ConfigError(f"filter.methods must name methods from {', '.join(METHODS)}")
        for w in self["construction.stat_windows"]:
            if w % (PERIOD_SECONDS // 60):
                raise ConfigError("construction.stat_windows are minutes and must be multiples of 10")
        paths = [Path(self[k]).resolve() for k in PATH_KEYS if self[k]]
        if len(set(paths)) != len(paths):
            raise ConfigError("data, status and output_dir must be distinct paths")
        # build the typed sections once so bad values fail early
        self.construction()
        self.relief()
        self.wrapper_training()
        self.final_training()
        for a in self["final.activations"]:
            if a not in ACTIVATIONS:
                raise ConfigError(f"unknown activation '{a}'")

    def construction(self) -> ConstructionConfig:
        step = PERIOD_SECONDS // 60
        return ConstructionConfig(
            lag_steps=self["construction.lag_steps"],
            stat_windows=tuple(w // step for w in self["construction.stat_windows"]),
            stats=self["construction.stats"],
            knowledge=KnowledgeConfig(self["construction.air_density"], self["construction.swept_area"]),
        )

    def relief(self) -> ReliefConfig:
        return ReliefConfig(self["filter.relief_samples"], self["filter.relief_sampling"], self.seed)

    def _training(self, section) -> TrainingConfig:
        return TrainingConfig(
            seed=self.seed, **{k: self[f"{section}.{k}"] for k in _TRAINING_KEYS}
        )

    def wrapper_training(self) -> TrainingConfig:
        return self._training("wrapper")

    def final_training(self) -> TrainingConfig:
        return self._training("final")

    def synth(self) -> SynthConfig:
        seed = self["synth.seed"] if self["synth.seed"] is not None else self.seed
        n = self["synth.n_rows"]
        if self["synth.fault_episodes"]:
            episodes = []
            for item in self["synth.fault_episodes"].split(";"):
                try:
                    start, dur, sev = item.split(":")
                    episodes.append(FaultEpisode(int(start), int(dur), float(sev)))
                except ValueError:
                    raise ConfigError(f"fault episode must be start:duration:severity, got {item!r}") from None
        else:
            episodes = plan_fault_episodes(
                n,
                self["synth.fault_count"],
                seed,
                self["synth.fault_min_rows"],
                self["synth.fault_max_rows"],
                (self["synth.fault_severity_min"], self["synth.fault_severity_max"]),
            )
        try:
            start = datetime.strptime(self["synth.start_time"], TIMESTAMP_FORMAT)
        except ValueError:
            raise ConfigError(f"synth.start_time must look like 2015-01-01T00:00:00") from None
        noise = {
            c: self[f"synth.noise_scale.{c}"]
            for c in ORIGINAL_CHANNELS
            if self[f"synth.noise_scale.{c}"] != 1.0
        }
        return SynthConfig(
            seed=seed,
            n_rows=n,
            rated_power=self["synth.rated_power"],
            rotor_diameter=self["synth.rotor_diameter"],
            weibull_shape=self["synth.weibull_shape"],
            weibull_scale=self["synth.weibull_scale"],
            fault_episodes=tuple(episodes),
            noise_scale=noise,
            missing_probability=self["synth.missing_probability"],
            start_time=start,
        )
