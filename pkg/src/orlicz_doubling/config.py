"""Experiment configuration: flat ``key = value`` files with flag overrides."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .cutoff import zeta_sum
from .errors import ContractError, DomainError
from .metric import DegeneracyProfile, MetricGrid
from .young import YoungFunction

__all__ = ["ExperimentConfig", "load_config_file", "parse_config_text"]

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


@dataclass(frozen=True)
class ExperimentConfig:
    profile: str = "exp-power"  # or "euclidean"
    sigma: float = 1.0
    half_width: float = 1.0
    grid_n: int = 256
    neighbors: int = 16
    bump: str = "log-power"  # or "power"
    alpha: float = 2.0  # log-power exponent
    p: float = 2.0  # power exponent
    gamma: float = 1.5
    J: int = 40
    r_min: float = 0.15
    r_max: float = 0.5
    r_count: int = 8
    geometric: bool = True
    epsilon: float = 0.1
    C_S: float = 1.0
    c_tilde: float | None = None  # None: 2 C_S / c(gamma)
    surrogate: str = "q"
    seed: int = 0
    out_dir: str = "out"
    format: str = "csv"

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for key, raw in values.items():
            name = key.replace("-", "_")
            if name not in known:
                raise ContractError(f"unknown config key {key!r}")
            kw[name] = _coerce(name, raw)
        return cls(**kw)

    def override(self, values: dict) -> "ExperimentConfig":
        """Return a copy with the non-``None`` entries of ``values`` applied."""
        kw = {k.replace("-", "_"): _coerce(k.replace("-", "_"), v) for k, v in values.items() if v is not None}
        return replace(self, **kw)

    def validate(self) -> None:
        self.make_profile()
        self.make_bump()
        if int(self.grid_n) != self.grid_n or self.grid_n < 4 or self.grid_n % 2:
            raise ContractError(f"grid_n must be an even integer >= 4, got {self.grid_n!r}")
        if self.neighbors not in (16, 32):
            raise ContractError(f"neighbors must be 16 or 32, got {self.neighbors!r}")
        if not self.half_width > 0:
            raise DomainError("half_width must be positive")
        zeta_sum(self.gamma)  # divergent-series check for gamma <= 1
        if int(self.J) != self.J or self.J < 2:
            raise ContractError("J must be an integer >= 2")
        if self.r_count < 1:
            raise ContractError("r_count must be >= 1")
        if self.geometric and not self.r_min > 0:
            raise DomainError("a geometric sweep requires r_min > 0")
        if not 0 <= self.r_min <= self.r_max:
            raise DomainError(f"need 0 <= r_min <= r_max, got r_min={self.r_min!r}, r_max={self.r_max!r}")
        if 2 * self.r_max > self.half_width:
            raise DomainError(f"r_max = {self.r_max!r} exceeds half_width / 2; the doubled ball must fit in the grid")
        if self.bump == "log-power" and not 0 < self.epsilon < self.alpha - 1:
            raise DomainError(f"need 0 < epsilon < alpha - 1, got epsilon={self.epsilon!r}, alpha={self.alpha!r}")
        if not self.C_S > 0:
            raise DomainError("C_S must be positive")
        if self.c_tilde is not None and not self.c_tilde > 0:
            raise DomainError("c_tilde must be positive")
        if self.surrogate not in ("q", "lip"):
            raise ContractError(f"surrogate must be 'q' or 'lip', got {self.surrogate!r}")
        if self.format not in ("csv", "json"):
            raise ContractError(f"format must be 'csv' or 'json', got {self.format!r}")

    def make_profile(self) -> DegeneracyProfile:
        if self.profile == "exp-power":
            return DegeneracyProfile.exp_power(self.sigma)
        if self.profile == "euclidean":
            return DegeneracyProfile.euclidean()
        raise ContractError(f"profile must be 'exp-power' or 'euclidean', got {self.profile!r}")

    def make_bump(self) -> YoungFunction:
        if self.bump == "log-power":
            return YoungFunction.log_power(self.alpha)
        if self.bump == "power":
            return YoungFunction.power(self.p)
        raise ContractError(f"bump must be 'log-power' or 'power', got {self.bump!r}")

    def make_grid(self) -> MetricGrid:
        return MetricGrid(self.half_width, self.grid_n, self.make_profile(), neighbors=self.neighbors)

    def radii(self) -> np.ndarray:
        if self.r_count == 1:
            return np.array([self.r_min])
        if self.geometric:
            return np.geomspace(self.r_min, self.r_max, self.r_count)
        return np.linspace(self.r_min, self.r_max, self.r_count)

    def effective_c_tilde(self) -> float:
        if self.c_tilde is not None:
            return self.c_tilde
        return 4.0 * self.C_S * zeta_sum(self.gamma)

    def to_dict(self) -> dict:
        return asdict(self)


def _coerce(name: str, raw):
    if raw is None:
        return None
    target = ExperimentConfig.__dataclass_fields__[name].type
    if not isinstance(raw, str):
        return raw
    s = raw.strip()
    try:
        if "bool" in target:
            if s.lower() not in _BOOL:
                raise ValueError(s)
            return _BOOL[s.lower()]
        if target.startswith("int"):
            return int(s)
        if "float" in target:
            if s.lower() in ("none", ""):
                return None
            v = float(s)
            if math.isnan(v):
                raise ValueError(s)
            return v
    except ValueError:
        raise ContractError(f"config key {name!r}: cannot parse {raw!r} as {target}") from None
    return s


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ContractError(f"config line {lineno}: empty key")
        out[key] = value
    return out


def load_config_file(path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text())
