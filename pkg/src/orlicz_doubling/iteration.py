"""The doubling iteration driven by an Orlicz-Sobolev inequality.

For a ball ``B`` of radius ``r``, ``B* = 2B`` and the shrinking balls
``B_j = {d <= r_j}`` of a cutoff sequence, the quantities

    P_j = mu(B*) / (Ct * j^gamma * mu(B_j))

must satisfy ``Phi(P_j) <= mu(B*) / mu(B_{j+1})`` whenever the inequality
holds with constant ``Ct`` on the cutoffs. With a log-power bump this gives
``P_{j+1} >= P_j (ln P_j)^alpha / (Ct (j+1)^gamma)``, which forces
``P_j >= P_1 e^(j-1)`` once ``P_1`` exceeds a threshold depending on
``(alpha, gamma, Ct)``. Since ``P_j`` is capped by
``mu(B*) / (Ct j^gamma mu(B/2))``, ``P_1`` must stay below that threshold,
which bounds the doubling constant.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .cutoff import zeta_sum
from .errors import ContractError, DomainError
from .young import BumpKind, YoungFunction, eval_phi

__all__ = [
    "IterationTrace",
    "pj_sequence",
    "StepVerdict",
    "RecursionReport",
    "recursion_check",
    "induction_holds",
    "Contradiction",
    "find_contradiction",
    "ThresholdReport",
    "induction_threshold",
    "doubling_bound",
    "best_doubling_bound",
    "SuperradiusBound",
    "minimal_c_tilde",
    "superradius_lower_bound",
    "write_trace_csv",
    "read_trace_csv",
]

# slack for the derived recursion, which re-associates the same float products
_ULP_SLACK = 8 * sys.float_info.epsilon


@dataclass(frozen=True)
class IterationTrace:
    measures: np.ndarray  # mu(B_j), j = 1..J
    mu_star: float
    c_tilde: float
    gamma: float
    p: np.ndarray
    mu_half: float | None = None
    radii: np.ndarray | None = None

    @property
    def J(self) -> int:
        return self.measures.size

    @property
    def j(self) -> np.ndarray:
        return np.arange(1, self.J + 1)

    def cap(self) -> np.ndarray | None:
        """Upper bound ``mu(B*) / (Ct j^gamma mu(B/2))`` on ``P_j``."""
        if self.mu_half is None:
            return None
        return self.mu_star / (self.c_tilde * self.j.astype(float) ** self.gamma * self.mu_half)


def pj_sequence(measures, mu_star: float, c_tilde: float, gamma: float,
                mu_half: float | None = None, radii=None) -> IterationTrace:
    m = np.array(measures, dtype=float).ravel()
    if m.size < 2:
        raise ContractError("a trace needs at least two ball measures")
    if not np.all(np.isfinite(m)) or np.any(m <= 0):
        raise DomainError("ball measures must be positive and finite")
    if not mu_star > 0 or not c_tilde > 0:
        raise DomainError("mu_star and c_tilde must be positive")
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    if mu_half is not None and not mu_half > 0:
        raise DomainError("mu_half must be positive")
    j = np.arange(1, m.size + 1, dtype=float)
    p = mu_star / (c_tilde * j**gamma * m)
    m.setflags(write=False)
    p.setflags(write=False)
    rr = None
    if radii is not None:
        rr = np.array(radii, dtype=float).ravel()[: m.size]
        rr.setflags(write=False)
    return IterationTrace(m, float(mu_star), float(c_tilde), float(gamma), p,
                          None if mu_half is None else float(mu_half), rr)


@dataclass(frozen=True)
class StepVerdict:
    j: int
    p_j: float
    setup_holds: bool
    active: bool  # P_j > 1; otherwise the log-power bump carries no information
    derived_holds: bool | None


@dataclass(frozen=True)
class RecursionReport:
    steps: tuple[StepVerdict, ...]

    @property
    def setup_verdicts(self) -> np.ndarray:
        return np.array([s.setup_holds for s in self.steps])

    @property
    def all_hold(self) -> bool:
        return all(s.setup_holds for s in self.steps)

    def first_failure(self) -> int | None:
        for s in self.steps:
            if not s.setup_holds:
                return s.j
        return None

    def implication_violations(self) -> list[int]:
        """Steps where the setup inequality holds, ``P_j > 1``, and the derived recursion fails."""
        return [s.j for s in self.steps if s.setup_holds and s.active and not s.derived_holds]

    def first_active(self) -> int | None:
        for s in self.steps:
            if s.active:
                return s.j
        return None


def _require_log_power(phi: YoungFunction) -> float:
    if phi.kind is not BumpKind.LOG_POWER:
        raise ContractError("the doubling recursion is stated for log-power bumps")
    return phi.param


def recursion_check(trace: IterationTrace, phi: YoungFunction) -> RecursionReport:
    """Per step ``j = 1..J-1``: does ``Phi(P_j) <= mu(B*)/mu(B_{j+1})`` hold, and does the derived recursion?"""
    alpha = _require_log_power(phi)
    p, m = trace.p, trace.measures
    steps = []
    for k in range(trace.J - 1):
        j = k + 1
        pj = float(p[k])
        setup = float(eval_phi(phi, pj)) <= trace.mu_star / m[k + 1]
        active = pj > 1.0
        derived = None
        if active:
            need = pj * math.log(pj) ** alpha / (trace.c_tilde * (j + 1) ** trace.gamma)
            derived = bool(p[k + 1] >= need * (1.0 - _ULP_SLACK))
        steps.append(StepVerdict(j, pj, bool(setup), active, derived))
    return RecursionReport(tuple(steps))


def induction_holds(trace: IterationTrace) -> np.ndarray:
    """Elementwise ``P_j >= P_1 e^(j-1)``."""
    return trace.p >= trace.p[0] * np.exp(trace.j - 1.0) * (1.0 - _ULP_SLACK)


@dataclass(frozen=True)
class Contradiction:
    fired: bool
    violating_j: int | None
    predicted_j: int | None
    measured_j: int | None
    reason: str


def find_contradiction(trace: IterationTrace, phi: YoungFunction, j_limit: int = 10_000) -> Contradiction:
    """Locate the step at which growth of ``P_j`` collides with its cap.

    ``predicted_j`` is the first ``J`` with ``P_1 e^(J-1) > cap_J``; it is only
    reported when ``P_1`` is above the sharper induction threshold and every
    setup verdict of the trace holds, so that the induction applies.
    ``measured_j`` is the first step of the trace itself whose ``P_j`` exceeds
    the cap.
    """
    alpha = _require_log_power(phi)
    if trace.mu_half is None:
        raise ContractError("contradiction detection needs mu(B/2) on the trace")
    cap = trace.cap()
    over = np.flatnonzero(trace.p > cap)
    measured = int(over[0]) + 1 if over.size else None

    predicted = None
    reason = ""
    thr = induction_threshold(alpha, trace.gamma, trace.c_tilde).sharper
    rep = recursion_check(trace, phi)
    if trace.p[0] < thr:
        reason = f"P_1 = {trace.p[0]:.6g} is below the induction threshold {thr:.6g}"
    elif not rep.all_hold:
        reason = f"setup inequality fails at j = {rep.first_failure()}"
    else:
        # ln(P_1) + J - 1 > ln(mu*/(Ct mu_half)) - gamma ln J
        J = np.arange(1, j_limit + 1, dtype=float)
        lhs = math.log(trace.p[0]) + J - 1.0
        rhs = math.log(trace.mu_star / (trace.c_tilde * trace.mu_half)) - trace.gamma * np.log(J)
        hit = np.flatnonzero(lhs > rhs)
        if hit.size:
            predicted = int(hit[0]) + 1
            reason = "induction growth exceeds the cap"
    hits = [v for v in (predicted, measured) if v is not None]
    first = min(hits) if hits else None
    if measured is not None and not reason:
        reason = "trace exceeds the cap"
    return Contradiction(first is not None, first, predicted, measured, reason)


@dataclass(frozen=True)
class ThresholdReport:
    alpha: float
    gamma: float
    c_tilde: float
    closed_form: float  # exp(2 + ((alpha-gamma)/alpha) (e Ct)^(1/(alpha-gamma)))
    sharper: float  # least P_1 with (ln P_1 + j - 1)^alpha >= e Ct (j+1)^gamma for all j >= 1
    binding_j: int

    def to_dict(self) -> dict:
        return asdict(self)


def _check_exponents(alpha: float, gamma: float) -> None:
    if not 1.0 < gamma < alpha:
        raise DomainError(f"the iteration requires 1 < gamma < alpha, got gamma={gamma!r}, alpha={alpha!r}")


def _safe_exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


def induction_threshold(alpha: float, gamma: float, c_tilde: float) -> ThresholdReport:
    alpha, gamma, c_tilde = float(alpha), float(gamma), float(c_tilde)
    _check_exponents(alpha, gamma)
    if not c_tilde > 0:
        raise DomainError("c_tilde must be positive")
    a = (alpha - gamma) / alpha
    log_ec = 1.0 + math.log(c_tilde)
    closed = _safe_exp(2.0 + a * _safe_exp(log_ec / (alpha - gamma)))

    # ln P_1 >= g(j) = K (j+1)^(gamma/alpha) - (j - 1) for every j >= 1, K = (e Ct)^(1/alpha).
    # g is concave in j, so the integer maximum sits next to the stationary point.
    K = math.exp(log_ec / alpha)
    q = gamma / alpha

    def g(j: float) -> float:
        return K * (j + 1.0) ** q - (j - 1.0)

    log_jstar = (math.log(K) + math.log(q)) / (1.0 - q)
    if log_jstar > 700:
        jstar = math.inf
    else:
        jstar = math.exp(log_jstar) - 1.0
    if math.isinf(jstar) or jstar > 1e15:
        return ThresholdReport(alpha, gamma, c_tilde, closed, math.inf, -1)
    cands = {1, max(1, math.floor(jstar)), max(1, math.ceil(jstar))}
    best_j = max(sorted(cands), key=g)
    log_p1 = max(0.0, g(best_j))
    return ThresholdReport(alpha, gamma, c_tilde, closed, _safe_exp(log_p1), int(best_j))


def doubling_bound(alpha: float, gamma: float, c_tilde: float, variant: str = "sharp") -> float:
    """Doubling constant implied by the threshold: ``C_D = Ct * P_1*``."""
    rep = induction_threshold(alpha, gamma, c_tilde)
    if variant == "sharp":
        return c_tilde * rep.sharper
    if variant == "closed":
        return c_tilde * rep.closed_form
    raise ContractError(f"unknown threshold variant {variant!r}")


def best_doubling_bound(alpha: float, C_S: float, gammas=None, count: int = 32,
                        variant: str = "sharp") -> tuple[float, float]:
    """Smallest ``C_D`` over ``gamma`` with ``Ct = 2 C_S / c(gamma) = 4 C_S zeta(gamma)``.

    The default grid runs from ``1 + (alpha-1)/count`` to ``(1 + alpha)/2``.
    Returns ``(gamma, C_D)``.
    """
    if gammas is None:
        lo = 1.0 + (alpha - 1.0) / count
        gammas = np.linspace(lo, 0.5 * (1.0 + alpha), count)
    results = [(doubling_bound(alpha, float(g), 4.0 * C_S * zeta_sum(float(g)), variant), float(g))
               for g in gammas]
    bound, gamma = min(results)
    return gamma, bound


def minimal_c_tilde(measure_ratio: float, alpha: float, gamma: float) -> float:
    """Least ``Ct`` compatible with the closed-form threshold when ``mu(B*)/mu(B) = D``.

    Solves ``ln D - ln Ct = 2 + ((alpha-gamma)/alpha) (e Ct)^(1/(alpha-gamma))``:
    for smaller ``Ct`` the iteration would reach a contradiction.
    """
    _check_exponents(alpha, gamma)
    return _minimal_c_tilde_log(math.log(measure_ratio), alpha, gamma)


def _minimal_c_tilde_log(L: float, alpha: float, gamma: float) -> float:
    a = (alpha - gamma) / alpha
    e_inv = 1.0 / (alpha - gamma)

    def h(t: float) -> float:
        return L - t - 2.0 - a * _safe_exp((1.0 + t) * e_inv)

    lo, hi = -10.0, 10.0
    while h(lo) <= 0:
        lo *= 2
    while h(hi) >= 0:
        hi *= 2
    return math.exp(brentq(h, lo, hi, xtol=1e-14, rtol=1e-14))


@lru_cache(maxsize=128)
def _c_tilde_power_constant(alpha: float, gamma: float) -> float:
    """``inf_{L > 0} minimal_c_tilde(e^L) / L^(alpha-gamma)``, the large-``L`` limit included."""
    a = (alpha - gamma) / alpha
    limit = math.exp(-1.0) * a ** -(alpha - gamma)
    Ls = np.geomspace(1e-3, 1e6, 600)
    vals = [_minimal_c_tilde_log(L, alpha, gamma) / L ** (alpha - gamma) for L in Ls]
    return min(min(vals), limit)


@dataclass(frozen=True)
class SuperradiusBound:
    value: float  # C_eps (ln D)^(alpha - gamma)
    C_eps: float
    exponent: float
    implicit_value: float  # (c / (2 C_S)) minimal_c_tilde(D), never below value
    gamma: float
    c: float
    vacuous: bool

    def to_dict(self) -> dict:
        return asdict(self)


def superradius_lower_bound(alpha: float, epsilon: float, C_S: float, measure_ratio: float,
                            gamma: float | None = None) -> SuperradiusBound:
    """Lower bound on ``phi(r)/r`` for a ball with ``mu(B)/mu(B/2) = measure_ratio``.

    Chain of constants: cutoffs with ``gamma = 1 + epsilon`` carry
    ``c = 1/(2 zeta(gamma))``; the weak inequality with constant ``C_S`` on
    ``B`` gives ``Ct = (2 C_S / c) phi(r)/r``; the closed-form threshold
    forces ``Ct >= minimal_c_tilde(D)``. Hence
    ``phi(r)/r >= (c / (2 C_S)) minimal_c_tilde(D) >= C_eps (ln D)^(alpha-gamma)``
    where ``C_eps = (c / (2 C_S)) inf_L minimal_c_tilde(e^L) / L^(alpha-gamma)``.
    """
    alpha, epsilon, C_S = float(alpha), float(epsilon), float(C_S)
    if not 0.0 < epsilon < alpha - 1.0:
        raise DomainError(f"need 0 < epsilon < alpha - 1, got epsilon={epsilon!r}, alpha={alpha!r}")
    if not C_S > 0:
        raise DomainError("C_S must be positive")
    g = 1.0 + epsilon if gamma is None else float(gamma)
    _check_exponents(alpha, g)
    c = 0.5 / zeta_sum(g)
    exponent = alpha - g
    C_eps = c / (2.0 * C_S) * _c_tilde_power_constant(alpha, g)
    D = float(measure_ratio)
    if not D > 1.0:
        return SuperradiusBound(0.0, C_eps, exponent, 0.0, g, c, True)
    value = C_eps * math.log(D) ** exponent
    implicit = c / (2.0 * C_S) * minimal_c_tilde(D, alpha, g)
    return SuperradiusBound(value, C_eps, exponent, implicit, g, c, False)


TRACE_COLUMNS = ("j", "r_j", "mu_B_j", "P_j", "verdict")


def write_trace_csv(trace: IterationTrace, path, report: RecursionReport | None = None) -> Path:
    path = Path(path)
    verdicts = {s.j: s.setup_holds for s in report.steps} if report is not None else {}
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(TRACE_COLUMNS)
        for k in range(trace.J):
            j = k + 1
            rj = "" if trace.radii is None else repr(float(trace.radii[k]))
            v = verdicts.get(j)
            wr.writerow([j, rj, repr(float(trace.measures[k])), repr(float(trace.p[k])),
                         "" if v is None else str(v).lower()])
    meta = path.with_suffix(".json")
    meta.write_text(json.dumps({
        "mu_star": trace.mu_star, "c_tilde": trace.c_tilde, "gamma": trace.gamma, "mu_half": trace.mu_half,
    }, indent=2))
    return path


def read_trace_csv(path) -> IterationTrace:
    """Inverse of :func:`write_trace_csv` (reads the sidecar JSON for the scalars)."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or tuple(rows[0].keys()) != TRACE_COLUMNS:
        raise ContractError(f"{path} is not a trace CSV with columns {TRACE_COLUMNS}")
    measures = [float(r["mu_B_j"]) for r in rows]
    radii = [float(r["r_j"]) for r in rows] if all(r["r_j"] for r in rows) else None
    return pj_sequence(measures, meta["mu_star"], meta["c_tilde"], meta["gamma"],
                       mu_half=meta.get("mu_half"), radii=radii)
