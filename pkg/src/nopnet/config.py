"""Experiment configuration: dataclasses, TOML/JSON loading, resolved dumps.

Agent defaults reproduce the published training setup exactly: 50 max
insertions, 1000 episodes per family, replay capacity 2000, discount 0.99997,
exploration 1.0 -> 0.5, 10 convolutional filters.
"""

import dataclasses
import json
import sys
from dataclasses import dataclass, field

from .corpus import FamilySpec, SyntheticConfig
from .errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class SplitConfig:
    train: float = 0.70
    val: float = 0.15
    test: float = 0.15

    @property
    def ratios(self):
        return (self.train, self.val, self.test)


@dataclass
class ClassifierConfig:
    epochs: int = 15
    embedding_dim: int = 4
    filter_spec: tuple = ((3, 100), (5, 100), (7, 100))
    n_classes: int = 9
    lr: float = 1e-3


@dataclass
class AgentConfig:
    maxturn: int = 50
    episodes: int = 1000
    buffer_capacity: int = 2000
    gamma: float = 0.99997
    epsilon_initial: float = 1.0
    epsilon_final: float = 0.5
    n_filters: int = 10
    filter_width: int = 3
    embedding_dim: int = 4
    head: str = "softmax"
    tau: float = 0.01
    lr: float = 1e-3
    batch_size: int = 32
    warmup: int = 100
    rl_pool: str = "val"   # split the per-family agents train on

    @property
    def epsilon_horizon(self):
        # Linear decay over the first half of the expected step budget.
        return max(1, self.episodes * self.maxturn // 2)


@dataclass
class EvalConfig:
    repeats: int = 1        # random-agent episodes per sample
    families: tuple = ()    # empty = all families


@dataclass
class ExperimentConfig:
    corpus: SyntheticConfig = field(default_factory=SyntheticConfig)
    splits: SplitConfig = field(default_factory=SplitConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 7


def default_config():
    """Desk-scale default: 9 families x 200 samples, family sizes spanning an
    order of magnitude, three NOP-bearing families (3, 4, 5)."""
    ranges = [(200, 320), (220, 360), (240, 400),     # short, NOP-free
              (300, 450), (450, 750), (550, 900),     # mid, NOP-bearing
              (700, 1200), (900, 1600), (1100, 2000)] # long, NOP-free
    specs = [FamilySpec(length_range=r, nop_bearing=f in (3, 4, 5))
             for f, r in enumerate(ranges)]
    cfg = ExperimentConfig()
    cfg.corpus = SyntheticConfig(families=9, samples_per_family=200,
                                 family_specs=specs, seed=cfg.seed)
    return cfg


def _update_dataclass(obj, data, path):
    for key, value in data.items():
        if not hasattr(obj, key):
            raise ConfigError(f"unknown config field {path}{key}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}{key} must be a table/object")
            _update_dataclass(current, value, f"{path}{key}.")
        elif key == "family_specs":
            setattr(obj, key, [FamilySpec(**{**spec,
                                             "length_range": tuple(spec["length_range"])}
                                          if "length_range" in spec else spec)
                               for spec in value])
        elif isinstance(current, tuple):
            setattr(obj, key, tuple(tuple(v) if isinstance(v, list) else v
                                    for v in value))
        else:
            setattr(obj, key, type(current)(value) if current is not None else value)


def load_config(path):
    """Read a TOML or JSON config; unset fields keep their defaults."""
    try:
        if path.endswith(".toml"):
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        else:
            with open(path) as fh:
                data = json.load(fh)
    except (OSError, ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = default_config()
    _update_dataclass(cfg, data, "")
    # Keep the corpus generator's seed slaved to the experiment seed unless
    # the file pinned it explicitly.
    if "corpus" not in data or "seed" not in data.get("corpus", {}):
        cfg.corpus.seed = cfg.seed
    return cfg


def dump_config(cfg, path):
    """Write the fully resolved config as JSON (reproducibility record)."""
    with open(path, "w") as fh:
        json.dump(dataclasses.asdict(cfg), fh, indent=2, sort_keys=True)


def validate(cfg):
    if abs(sum(cfg.splits.ratios) - 1.0) > 1e-9:
        raise ConfigError(f"splits: ratios sum to {sum(cfg.splits.ratios)}, expected 1")
    if cfg.agent.head not in ("softmax", "linear"):
        raise ConfigError(f"agent.head: unknown head mode {cfg.agent.head!r}")
    if cfg.agent.rl_pool not in ("train", "val", "test"):
        raise ConfigError(f"agent.rl_pool: unknown split {cfg.agent.rl_pool!r}")
    if not 0.0 <= cfg.agent.epsilon_final <= cfg.agent.epsilon_initial <= 1.0:
        raise ConfigError("agent: need 0 <= epsilon_final <= epsilon_initial <= 1")
    if cfg.agent.warmup < cfg.agent.batch_size:
        raise ConfigError("agent.warmup must be >= agent.batch_size")
    return cfg
