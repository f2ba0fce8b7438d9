"""Simulation configuration.

Configs load from flat key = value text files (# comments allowed) or
plain dicts.  A handful of named presets mirror the interesting
protocol configurations: the directory baseline, base tardis, tardis
with livelock detection, and fully optimized tardis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from .cachemem import LEASE_VALUES
from .consistency import MemoryModel


class ConfigError(ValueError):
    pass


@dataclass
class SimConfig:
    protocol: str = "tardis"            # tardis | directory
    model: str = "tso"                  # sc | tso | pso | rc
    cores: int = 2
    mesi: bool = True
    static_lease: int = 8
    lease_predictor: bool = False
    livelock_detector: bool = False
    ahb_entries: int = 8
    thresh_min: int = 100
    thresh_max: int = 800
    check_thresh: int = 10
    self_increment_period: int = 0      # 0 = pick default from detector setting
    store_buffer: int = 8               # entries; SC always runs with 0
    l1_kb: int = 32
    l1_ways: int = 4
    llc_kb: int = 256
    llc_ways: int = 8
    line_bytes: int = 64
    addr_lines: int = 4096
    dram_latency: int = 100
    hop_cycles: int = 2
    flit_bits: int = 128
    skip_prob: float = 0.25             # seeded schedule: chance a core sits out a step
    max_steps: int = 5_000_000
    seed: int = 0
    fence_each_op: bool = False         # treat every memory op as also a fence

    def __post_init__(self):
        if self.protocol not in ("tardis", "directory"):
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        try:
            MemoryModel(self.model)
        except ValueError:
            raise ConfigError(f"unknown model {self.model!r}") from None
        if self.cores < 1:
            raise ConfigError("cores must be >= 1")
        if self.static_lease < 1:
            raise ConfigError("static_lease must be >= 1")
        if self.lease_predictor and self.static_lease not in LEASE_VALUES:
            raise ConfigError(
                f"lease_predictor needs static_lease in {LEASE_VALUES}")
        if self.self_increment_period == 0:
            # detector runs tolerate a slower forced advance
            self.self_increment_period = 1000 if self.livelock_detector else 100
        if self.self_increment_period < 0:
            raise ConfigError("self_increment_period must be >= 0 (0 = default)")

    @property
    def memory_model(self) -> MemoryModel:
        return MemoryModel(self.model)

    @property
    def data_flits(self) -> int:
        return math.ceil(self.line_bytes * 8 / self.flit_bits)

    @property
    def store_buffer_size(self) -> int:
        """Effective store buffer entries; SC drains every store."""
        if self.memory_model is MemoryModel.SC or self.fence_each_op:
            return 0
        return self.store_buffer

    @property
    def mesh_width(self) -> int:
        return max(1, math.ceil(math.sqrt(self.cores)))

    def tile(self, endpoint: int) -> tuple[int, int]:
        w = self.mesh_width
        e = max(0, endpoint)
        return (e % w, e // w)

    def hops(self, a: int, b: int) -> int:
        """XY mesh distance between two core endpoints."""
        xa, ya = self.tile(a)
        xb, yb = self.tile(b)
        return abs(xa - xb) + abs(ya - yb)

    def home_tile(self, addr: int) -> int:
        return (addr // self.line_bytes) % self.cores

    def identity(self) -> dict:
        return {
            "protocol": self.protocol,
            "model": self.model,
            "cores": self.cores,
            "mesi": self.mesi,
            "static_lease": self.static_lease,
            "lease_predictor": self.lease_predictor,
            "livelock_detector": self.livelock_detector,
            "self_increment_period": self.self_increment_period,
            "store_buffer": self.store_buffer_size,
            "seed": self.seed,
        }


_BOOL_KEYS = {"mesi", "lease_predictor", "livelock_detector", "fence_each_op"}
_ON = {"on", "true", "1", "yes"}
_OFF = {"off", "false", "0", "no"}


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if key in _BOOL_KEYS:
        low = raw.lower()
        if low in _ON:
            return True
        if low in _OFF:
            return False
        raise ConfigError(f"{key} wants on/off, got {raw!r}")
    if key in ("protocol", "model"):
        return raw.lower()
    if key == "skip_prob":
        return float(raw)
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def config_from_mapping(mapping: dict) -> SimConfig:
    known = {f.name for f in fields(SimConfig)}
    kwargs = {}
    for key, val in mapping.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(key, str(val)) if isinstance(val, str) else val
    return SimConfig(**kwargs)


def load_config(path: str) -> SimConfig:
    mapping = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected key = value")
            key, _, val = line.partition("=")
            mapping[key.strip()] = val.strip()
    return config_from_mapping(mapping)


PRESETS = {
    "directory": {"protocol": "directory", "model": "tso"},
    "tardis-base": {"protocol": "tardis", "model": "tso", "mesi": True,
                    "static_lease": 8, "livelock_detector": False,
                    "lease_predictor": False},
    "tardis-live": {"protocol": "tardis", "model": "tso", "mesi": True,
                    "static_lease": 8, "livelock_detector": True,
                    "lease_predictor": False},
    "tardis-opt": {"protocol": "tardis", "model": "tso", "mesi": True,
                   "static_lease": 8, "livelock_detector": True,
                   "lease_predictor": True},
}
PRESETS["tardis"] = PRESETS["tardis-base"]


def preset(name: str, **overrides) -> SimConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    merged = dict(PRESETS[name])
    merged.update(overrides)
    return config_from_mapping(merged)


def with_overrides(cfg: SimConfig, pairs: list[str]) -> SimConfig:
    """Apply key=value override strings on top of an existing config."""
    updates = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        key, _, val = pair.partition("=")
        updates[key.strip()] = val.strip()
    known = {f.name for f in fields(SimConfig)}
    coerced = {}
    for key, val in updates.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        coerced[key] = _coerce(key, val)
    merged = replace(cfg, **coerced)
    return merged
