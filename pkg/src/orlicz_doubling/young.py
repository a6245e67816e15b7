"""Young functions and Luxemburg norms over discrete measures.

Two bump families are realized:

* ``LogPower(alpha)``: ``Phi(t) = t (ln t)^alpha`` for ``t > 1`` and ``0`` on ``[0, 1]``.
* ``Power(p)``: ``Phi(t) = t^p``; ``p = 1`` is allowed as the identity bump
  although it is not a Young function in the strict sense.

The Luxemburg norm of ``f`` with respect to a probability-normalized discrete
measure is ``inf{k > 0 : sum_i Phi(|f_i| / k) w_i / W <= 1}``; it is computed
by bracketing followed by bisection on ``k``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DomainError

__all__ = [
    "BumpKind",
    "YoungFunction",
    "DiscreteMeasureSpace",
    "ConditionResult",
    "YoungReport",
    "eval_phi",
    "phi_inverse",
    "check_young",
    "luxemburg_norm",
    "lp_norm",
]

# Relative width at which bisection on k stops; well below the 1e-10 contract.
_K_RTOL = 1e-13
_K_FLOOR = 1e-300


class BumpKind(str, enum.Enum):
    LOG_POWER = "log-power"
    POWER = "power"


@dataclass(frozen=True)
class YoungFunction:
    """A convex bump ``Phi`` together with its calculus.

    Use the :meth:`log_power` and :meth:`power` constructors rather than
    building instances directly.
    """

    kind: BumpKind
    param: float

    def __post_init__(self):
        kind = BumpKind(self.kind)
        object.__setattr__(self, "kind", kind)
        param = float(self.param)
        # Power(1) is admitted as the identity bump (for L^1 comparisons); check_young flags it
        if kind is BumpKind.LOG_POWER and not (math.isfinite(param) and param > 1.0):
            raise DomainError(f"log-power bump requires alpha > 1, got {self.param!r}")
        if kind is BumpKind.POWER and not (math.isfinite(param) and param >= 1.0):
            raise DomainError(f"power bump requires p >= 1, got {self.param!r}")
        object.__setattr__(self, "param", param)

    @classmethod
    def log_power(cls, alpha: float) -> "YoungFunction":
        return cls(BumpKind.LOG_POWER, alpha)

    @classmethod
    def power(cls, p: float) -> "YoungFunction":
        return cls(BumpKind.POWER, p)

    @property
    def alpha(self) -> float:
        if self.kind is not BumpKind.LOG_POWER:
            raise AttributeError("alpha is only defined for log-power bumps")
        return self.param

    @property
    def p(self) -> float:
        if self.kind is not BumpKind.POWER:
            raise AttributeError("p is only defined for power bumps")
        return self.param

    def __call__(self, t):
        return eval_phi(self, t)

    def derivative(self, t):
        """Right derivative of ``Phi``; for log-power bumps it is continuous at 1."""
        t = _as_nonnegative(t)
        if self.kind is BumpKind.POWER:
            out = self.param * t ** (self.param - 1.0)
        else:
            out = np.zeros_like(t)
            m = t > 1.0
            lg = np.log(t[m])
            out[m] = lg**self.param + self.param * lg ** (self.param - 1.0)
        return out if out.ndim else float(out)

    def psi(self, t):
        """``Phi(t) / t`` for ``t > 0``."""
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise DomainError("psi(t) = Phi(t)/t requires t > 0")
        return eval_phi(self, t) / t

    def inverse(self, y):
        return phi_inverse(self, y)

    def describe(self) -> str:
        if self.kind is BumpKind.LOG_POWER:
            return f"LogPower(alpha={self.param:g})"
        return f"Power(p={self.param:g})"


def _as_nonnegative(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("Young functions are defined on [0, inf); got a negative or NaN argument")
    return arr


def eval_phi(phi: YoungFunction, t):
    """Evaluate ``Phi(t)`` elementwise. Scalars in, scalars out."""
    arr = _as_nonnegative(t)
    if phi.kind is BumpKind.POWER:
        out = arr**phi.param
    else:
        out = np.zeros_like(arr)
        m = arr > 1.0
        out[m] = arr[m] * np.log(arr[m]) ** phi.param
    return out if out.ndim else float(out)


def phi_inverse(phi: YoungFunction, y: float) -> float:
    """Right-continuous inverse ``sup{t >= 0 : Phi(t) <= y}``.

    For ``y > 0`` this is the unique root of ``Phi(t) = y``. At ``y = 0`` the
    log-power bump is flat on ``[0, 1]`` and the value returned is ``1``.
    """
    y = float(y)
    if not y >= 0 or math.isinf(y):
        raise DomainError(f"phi_inverse requires finite y >= 0, got {y!r}")
    if phi.kind is BumpKind.POWER:
        return y ** (1.0 / phi.param)
    if y == 0.0:
        return 1.0
    lo, hi = 1.0, 2.0
    while eval_phi(phi, hi) < y:
        lo, hi = hi, 2.0 * hi
    # invariant: Phi(lo) < y <= Phi(hi)
    while hi - lo > 1e-15 * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if eval_phi(phi, mid) < y:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass(frozen=True)
class DiscreteMeasureSpace:
    """Nonnegative cell weights; integrals are taken against ``weights / total``."""

    weights: np.ndarray
    total: float = field(init=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size == 0:
            raise ContractError("a measure space needs at least one cell")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DomainError("measure weights must be finite and nonnegative")
        total = float(w.sum())
        if not total > 0:
            raise DomainError("measure has zero total mass")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "total", total)

    @classmethod
    def uniform(cls, n: int) -> "DiscreteMeasureSpace":
        return cls(np.ones(n))

    @property
    def normalized(self) -> np.ndarray:
        return self.weights / self.total

    def __len__(self) -> int:
        return self.weights.size

    def integrate(self, values) -> float:
        """Integral of ``values`` against the normalized measure."""
        v = _check_values(values, self)
        return float(np.dot(v, self.weights) / self.total)


def _check_values(f, space: DiscreteMeasureSpace) -> np.ndarray:
    arr = np.asarray(f, dtype=float).ravel()
    if arr.size != len(space):
        raise ContractError(f"function has {arr.size} entries but the space has {len(space)} cells")
    if not np.all(np.isfinite(arr)):
        raise DomainError("function values must be finite")
    return arr


def luxemburg_norm(f, space: DiscreteMeasureSpace, phi: YoungFunction) -> float:
    """Luxemburg norm of ``f`` in ``L^Phi(weights / total)``."""
    a = np.abs(_check_values(f, space))
    wn = space.normalized
    keep = (a > 0) & (wn > 0)
    a, wn = a[keep], wn[keep]
    if a.size == 0:
        return 0.0

    def modular(k: float) -> float:
        return float(np.dot(eval_phi(phi, a / k), wn))

    hi = 2.0 * float(a.max())
    while modular(hi) > 1.0:
        hi *= 2.0
    lo = 0.5 * hi
    while modular(lo) <= 1.0:
        hi = lo
        lo *= 0.5
        if lo < _K_FLOOR:
            return hi
    # invariant: modular(lo) > 1 >= modular(hi)
    while hi - lo > _K_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if modular(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return hi


def lp_norm(f, space: DiscreteMeasureSpace, p: float) -> float:
    """``(sum |f_i|^p w_i / W)^(1/p)`` for ``p >= 1``."""
    p = float(p)
    if not p >= 1.0 or math.isinf(p):
        raise DomainError(f"lp_norm requires finite p >= 1, got {p!r}")
    a = np.abs(_check_values(f, space))
    scale = float(a.max()) if a.size else 0.0
    if scale == 0.0:
        return 0.0
    # factor out the max so that large p does not overflow
    return scale * float(np.dot((a / scale) ** p, space.normalized)) ** (1.0 / p)


@dataclass(frozen=True)
class ConditionResult:
    passed: bool
    witness: float | None = None
    detail: str = ""


@dataclass(frozen=True)
class YoungReport:
    phi: YoungFunction
    conditions: dict[str, ConditionResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions.values())

    def failures(self) -> dict[str, ConditionResult]:
        return {k: v for k, v in self.conditions.items() if not v.passed}


def check_young(phi: YoungFunction, sample_count: int = 64, seed: int = 0) -> YoungReport:
    """Sample the defining properties of a Young function on geometric grids.

    Each condition reports pass/fail; on failure ``witness`` holds the
    offending sample point.
    """
    if sample_count < 16:
        raise ContractError("check_young needs sample_count >= 16")
    rng = np.random.default_rng(seed)
    cond: dict[str, ConditionResult] = {}

    v0 = eval_phi(phi, 0.0)
    cond["phi_zero_at_origin"] = ConditionResult(v0 == 0.0, None if v0 == 0.0 else 0.0)

    grid = np.concatenate([[0.0], np.geomspace(1e-4, 1e4, sample_count)])
    a = rng.choice(grid, size=4 * sample_count)
    b = rng.choice(grid, size=4 * sample_count)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    lam = rng.uniform(0.0, 1.0, size=lo.size)
    lhs = eval_phi(phi, lam * lo + (1 - lam) * hi)
    rhs = lam * eval_phi(phi, lo) + (1 - lam) * eval_phi(phi, hi)
    bad = np.flatnonzero(lhs > rhs + 1e-12 * np.maximum(1.0, rhs))
    cond["convex"] = ConditionResult(
        bad.size == 0, None if bad.size == 0 else float(lam[bad[0]] * lo[bad[0]] + (1 - lam[bad[0]]) * hi[bad[0]])
    )

    big = 10.0 ** np.arange(1, 9)
    psi_big = phi.psi(big)
    inc = np.flatnonzero(np.diff(psi_big) <= 0)
    ok = inc.size == 0 and psi_big[-1] > psi_big[0] * 2
    cond["psi_to_infinity"] = ConditionResult(ok, None if ok else float(big[inc[0] + 1] if inc.size else big[-1]))

    small = 10.0 ** -np.arange(1, 9, dtype=float)
    psi_small = phi.psi(small)
    up = np.flatnonzero(np.diff(psi_small) > 0)
    ok = up.size == 0 and psi_small[-1] <= 1e-6
    cond["psi_to_zero"] = ConditionResult(ok, None if ok else float(small[up[0] + 1] if up.size else small[-1]))

    pts = np.geomspace(1e-6, 1e8, 4 * sample_count)
    psi_pts = phi.psi(pts)
    dec = np.flatnonzero(np.diff(psi_pts) < -1e-12 * np.abs(psi_pts[1:]))
    cond["psi_nondecreasing"] = ConditionResult(dec.size == 0, None if dec.size == 0 else float(pts[dec[0] + 1]))

    if phi.kind is BumpKind.LOG_POWER:
        t = np.geomspace(1.0 + 1e-9, 1e8, 4 * sample_count)
        floor = t * np.log(t) ** phi.param
        short = np.flatnonzero(eval_phi(phi, t) < floor - 1e-12)
        cond["log_power_dominance"] = ConditionResult(short.size == 0, None if short.size == 0 else float(t[short[0]]))

    return YoungReport(phi, cond)
