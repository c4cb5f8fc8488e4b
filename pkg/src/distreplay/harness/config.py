"""Experiment configuration: flat ``key = value`` files plus presets.

Precedence, lowest first: built-in defaults, ``preset``, config file,
command-line flags.  Lines starting with ``#`` are comments.

Example file::

    env = mountain_car
    preset = classic-small
    episodes = 1500
    strategies = uniform, distribution_aware
    betas = 0.5
    seeds = 0-9
"""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..errors import ConfigError
from ..sampling import SamplerConfig, Strategy

# Replay capacities and cluster budgets used by the classic-control and
# hashed-feature protocols.
PRESETS: dict[str, dict[str, object]] = {
    "classic": {"buffer_size": 50_000, "clusterer": "kmeans", "clusters": 64},
    "classic-small": {"buffer_size": 10_000, "clusterer": "kmeans", "clusters": 64},
    "hash": {"buffer_size": 50_000, "clusterer": "simhash", "clusters": 128},
}

ENV_NAMES = ("gridworld", "chain", "mountain_car")


def parse_seeds(text: str) -> list[int]:
    """``"0,2,5"`` or ``"0-9"`` or a mix like ``"0-2,7"``."""
    seeds: list[int] = []
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = part.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise ConfigError(f"cannot parse seed list entry {part!r}") from None
    return seeds


def _split(text) -> list[str]:
    if isinstance(text, (list, tuple)):
        return [str(t) for t in text]
    return [t.strip() for t in str(text).split(",") if t.strip()]


@dataclass
class ExperimentConfig:
    env: str = "mountain_car"
    map: Optional[str] = None
    grid_width: int = 10
    grid_height: int = 10
    chain_states: int = 3
    slip: float = 0.0
    max_steps: Optional[int] = None
    bins: int = 40

    episodes: int = 500
    alpha: float = 0.1
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_anneal_steps: Optional[int] = None
    target_sync: int = 20
    batch_size: int = 32
    warmup: int = 1000
    buffer_size: int = 50_000

    clusterer: str = "kmeans"
    clusters: int = 64
    code_bits: Optional[int] = None
    kmeans_warmup: int = 2000
    kmeans_refit: int = 0

    strategies: list = field(default_factory=lambda: ["uniform", "distribution_aware"])
    betas: list = field(default_factory=lambda: [0.5])
    seeds: list = field(default_factory=lambda: [0])
    master_seed: int = 0
    out: str = "results"
    workers: int = 1

    audit_transitions: int = 200
    audit_draws: int = 1_000_000
    report_steps: int = 100_000

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.env not in ENV_NAMES:
            raise ConfigError(f"unknown env {self.env!r}; choose from {', '.join(ENV_NAMES)}")
        if self.clusterer not in ("simhash", "kmeans"):
            raise ConfigError(f"unknown clusterer {self.clusterer!r}")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        for s in self.strategies:
            try:
                Strategy(s)
            except ValueError:
                raise ConfigError(f"unknown strategy {s!r}") from None
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if Strategy.DISTRIBUTION_AWARE.value in self.strategies and not self.betas:
            raise ConfigError("distribution_aware needs at least one beta")
        for b in self.betas:
            if not 0.0 <= b <= 1.0:
                raise ConfigError(f"beta must lie in [0, 1], got {b}")
        for name in ("episodes", "buffer_size", "batch_size", "clusters", "warmup", "target_sync", "bins", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.clusterer == "kmeans" and self.kmeans_warmup < self.clusters:
            raise ConfigError("kmeans_warmup must be at least the number of clusters")
        if self.map is not None and self.env != "gridworld":
            raise ConfigError("map is only meaningful for env = gridworld")

    def sampler_configs(self) -> list[SamplerConfig]:
        """One sampler per run group, in config order."""
        out = []
        for s in self.strategies:
            strategy = Strategy(s)
            if strategy is Strategy.DISTRIBUTION_AWARE:
                out.extend(SamplerConfig(strategy, float(b)) for b in self.betas)
            else:
                out.append(SamplerConfig(strategy, 1.0 if strategy is Strategy.UNIFORM else 0.0))
        return out

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            lines.append(f"{f.name} = {'' if value is None else value}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_INT = {"grid_width", "grid_height", "chain_states", "max_steps", "bins", "episodes",
        "epsilon_anneal_steps", "target_sync", "batch_size", "warmup", "buffer_size",
        "clusters", "code_bits", "kmeans_warmup", "kmeans_refit", "master_seed", "workers",
        "audit_transitions", "audit_draws", "report_steps"}
_FLOAT = {"slip", "alpha", "gamma", "epsilon_start", "epsilon_end"}


def _convert(key: str, raw):
    if raw is None or (isinstance(raw, str) and raw.strip() == "" and key in _INT | _FLOAT | {"map"}):
        return None
    try:
        if key in _INT:
            return int(str(raw).replace("_", ""))
        if key in _FLOAT:
            return float(raw)
        if key == "strategies":
            return _split(raw)
        if key == "betas":
            return [float(b) for b in _split(raw)]
        if key == "seeds":
            return parse_seeds(raw) if isinstance(raw, str) else [int(s) for s in raw]
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return str(raw).strip()


def parse_config_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS and key != "preset":
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = value
    return values


def build_config(file_values: Optional[dict] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Merge defaults, preset, file values and overrides into a validated config."""
    file_values = dict(file_values or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    preset = overrides.pop("preset", None) or file_values.pop("preset", None)
    file_values.pop("preset", None)
    merged: dict[str, object] = {}
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        merged.update(PRESETS[preset])
    merged.update(file_values)
    merged.update(overrides)
    kwargs = {}
    for key, raw in merged.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}")
        kwargs[key] = _convert(key, raw) if isinstance(raw, str) or key in ("seeds",) else raw
    return ExperimentConfig(**kwargs)


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return build_config(parse_config_text(text), overrides)


def run_seed(master_seed: int, sampler: SamplerConfig, seed: int) -> int:
    """Per-run seed from ``(master seed, strategy, beta, seed index)``.

    Hash-derived so that adding or removing a run group never changes the
    randomness of any other run.
    """
    key = f"{master_seed}:{sampler.strategy.value}:{sampler.effective_beta!r}:{seed}"
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little")


def run_id(sampler: SamplerConfig, seed: int) -> str:
    return f"{sampler.strategy.value}-b{sampler.effective_beta:g}-s{seed}"
