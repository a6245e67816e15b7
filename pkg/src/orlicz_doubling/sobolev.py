"""Empirical Orlicz-Sobolev ratios on metric grids.

For a test function ``w`` supported in a ball ``B`` the ratio

    ||w||_{L^Phi(mu_B)} / ||g||_{L^p(mu_B)},    mu_B = mu / mu(B),

is a lower estimate of ``C_S * phi(r)`` for any inequality of the form
``||w||_Phi <= C_S phi(r) ||g||_p`` that holds on ``B``. The gradient
surrogate ``g`` is either the Q-gradient (central differences) or the
one-step metric slope ``discrete_lip``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cutoff import cutoff_field, discrete_lip, radii_sequence
from .errors import ContractError, DegenerateInputError, DomainError
from .iteration import superradius_lower_bound
from .metric import MetricGrid, ball_measure, q_gradient
from .young import DiscreteMeasureSpace, YoungFunction, luxemburg_norm

__all__ = [
    "q_gradient",
    "SobolevReport",
    "sobolev_ratio",
    "radial_family",
    "x_tent_family",
    "PPReport",
    "pp_sobolev_check",
    "superradius_formula",
    "superradius_formula_raw",
    "SuperradiusRow",
    "SuperradiusSweep",
    "empirical_superradius",
    "loglog_slope",
    "write_reports_csv",
]

SUPPORT_TOL = 1e-12
DEFAULT_FAMILY = ("psi1", "psi2", "lin", "quad")


@dataclass(frozen=True)
class SobolevReport:
    r: float
    lhs: float
    rhs: float
    ratio: float
    family: str
    surrogate: str
    rhs_p: float
    flag: str = ""  # "", "degenerate" or "cannot-hold"


def _ball_mask(grid: MetricGrid, origin, r: float) -> np.ndarray:
    return grid.distance_field(origin) < r


def _check_support(w: np.ndarray, inside: np.ndarray) -> None:
    outside = np.abs(w[~inside])
    if outside.size and outside.max() > SUPPORT_TOL:
        raise ContractError(f"test function is not supported in the ball (|w| = {outside.max():.3g} outside)")


def _gradient(w: np.ndarray, grid: MetricGrid, surrogate: str) -> np.ndarray:
    if surrogate == "q":
        return q_gradient(w, grid)
    if surrogate == "lip":
        return discrete_lip(w, grid)
    raise ContractError(f"unknown gradient surrogate {surrogate!r} (use 'q' or 'lip')")


def sobolev_ratio(w, grid: MetricGrid, origin, r: float, phi: YoungFunction,
                  rhs_p: float = 1.0, surrogate: str = "q", family: str = "") -> SobolevReport:
    """Measure ``||w||_{L^Phi(mu_B)}`` against ``||g||_{L^p(mu_B)}`` on ``B = B(origin, r)``."""
    if not rhs_p >= 1:
        raise DomainError("rhs_p must be >= 1")
    w = grid._check_field(w)
    if not np.all(np.isfinite(w)):
        raise DomainError("test function must be finite")
    inside = _ball_mask(grid, origin, r)
    _check_support(w, inside)
    mu_b = ball_measure(grid, origin, r)
    if mu_b <= 0:
        raise DegenerateInputError(f"ball of radius {r:g} carries no grid mass")

    lhs = luxemburg_norm(w[inside], DiscreteMeasureSpace(grid.cell_area[inside]), phi)
    g = _gradient(w, grid, surrogate)
    # the gradient may spill one node past the ball; integrate it everywhere against mu / mu(B)
    rhs = float(np.sum(g**rhs_p * grid.cell_area) / mu_b) ** (1.0 / rhs_p)

    flag = ""
    if rhs == 0.0:
        ratio = math.nan
        flag = "degenerate" if lhs == 0.0 else "cannot-hold"
    else:
        ratio = lhs / rhs
    return SobolevReport(float(r), lhs, rhs, ratio, family, surrogate, float(rhs_p), flag)


def radial_family(grid: MetricGrid, origin, r: float, members=DEFAULT_FAMILY,
                  gamma: float = 2.0, J: int = 40) -> dict[str, np.ndarray]:
    """Radial test functions of ``d = d(., origin)`` supported in ``B(origin, r)``.

    ``psiK`` is the K-th accumulating cutoff at radius ``r``; ``lin`` and
    ``quad`` are ``((r - d)^+ / r)^beta`` with ``beta = 1, 2``.
    """
    d = grid.distance_field(origin)
    ramp = np.where(d < r, (r - d) / r, 0.0)
    seq = None
    out = {}
    for name in members:
        if name.startswith("psi"):
            if seq is None:
                seq = radii_sequence(r, gamma, J)
            out[name] = cutoff_field(seq, int(name[3:]), grid, origin)
        elif name == "lin":
            out[name] = ramp
        elif name == "quad":
            out[name] = ramp**2
        else:
            raise ContractError(f"unknown family member {name!r}")
    return out


def x_tent_family(grid: MetricGrid, origin, r: float, widths=(1.0, 0.5)) -> dict[str, np.ndarray]:
    """Tents in ``x`` of half-width ``w * r`` about the origin, constant in ``y``, cut to the ball."""
    i, _ = grid.check_origin(origin)
    inside = _ball_mask(grid, origin, r)
    X, _ = grid.coords
    out = {}
    for wd in widths:
        tent = np.clip(1.0 - np.abs(X - grid.x[i]) / (wd * r), 0.0, None)
        out[f"xtent{wd:g}"] = np.where(inside, tent, 0.0)
    return out


@dataclass(frozen=True)
class PPReport:
    r: float
    p: float
    lhs_integral: float  # integral of |w|^p over B
    rhs_integral: float  # integral of |grad w|^p
    smallest_C: float  # lhs / (r^p rhs)
    bound: float  # 2^p, from integrating along horizontal lines
    passed: bool
    gradient: str


def pp_sobolev_check(w, grid: MetricGrid, origin, r: float, p: float = 1.0,
                     gradient: str = "x") -> PPReport:
    """Smallest ``C`` in ``int_B |w|^p <= C r^p int |grad w|^p``.

    ``gradient="x"`` uses ``|w_x|`` only, which is the component the line
    integration argument consumes; because ``|grad w| >= |w_x|`` a constant
    that passes with ``|w_x|`` also passes with the full Euclidean gradient
    (``gradient="euclidean"``). Outside the ball ``w`` is extended by zero,
    so a cut edge contributes its jump to the gradient.
    """
    if not p >= 1:
        raise DomainError("p must be >= 1")
    w = grid._check_field(w)
    inside = _ball_mask(grid, origin, r)
    _check_support(w, inside)
    gx, gy = grid.partials(w)
    if gradient == "x":
        g = np.abs(gx)
    elif gradient == "euclidean":
        g = np.hypot(gx, gy)
    else:
        raise ContractError(f"unknown gradient {gradient!r} (use 'x' or 'euclidean')")
    lhs = float(np.sum(np.abs(w) ** p * grid.cell_area))
    rhs = float(np.sum(g**p * grid.cell_area))
    bound = 2.0**p
    if lhs == 0.0:
        return PPReport(float(r), float(p), 0.0, rhs, 0.0, bound, True, gradient)
    if rhs == 0.0:
        return PPReport(float(r), float(p), lhs, 0.0, math.inf, bound, False, gradient)
    C = lhs / (r**p * rhs)
    return PPReport(float(r), float(p), lhs, rhs, C, bound, C <= bound, gradient)


def _check_sigma_alpha(alpha: float, sigma: float, r) -> None:
    if not sigma * alpha < 1.0:
        raise DomainError(f"the superradius formula needs sigma * alpha < 1, got {sigma * alpha:g}")
    if np.any(np.asarray(r) <= 0):
        raise DomainError("r must be positive")


def superradius_formula_raw(alpha: float, sigma: float, r, C: float = 1.0):
    """``C |F'(r)|^alpha r^(alpha+1)`` with ``F(r) = r^-sigma``."""
    _check_sigma_alpha(alpha, sigma, r)
    r = np.asarray(r, dtype=float)
    out = C * (sigma * r ** (-sigma - 1.0)) ** alpha * r ** (alpha + 1.0)
    return out if out.ndim else float(out)


def superradius_formula(alpha: float, sigma: float, r, C: float = 1.0):
    """``C sigma^alpha r^(1 - sigma alpha)``."""
    _check_sigma_alpha(alpha, sigma, r)
    r = np.asarray(r, dtype=float)
    out = C * sigma**alpha * r ** (1.0 - sigma * alpha)
    raw = superradius_formula_raw(alpha, sigma, r, C)
    if not np.allclose(out, raw, rtol=1e-12, atol=0.0):
        raise AssertionError("simplified and raw superradius formulas disagree")
    return out if out.ndim else float(out)


def loglog_slope(x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass(frozen=True)
class SuperradiusRow:
    r: float
    max_ratio: float
    argmax: str
    phi_over_r: float
    doubling: float  # mu(2B) / mu(B)
    conjectured: float  # (ln doubling)^alpha
    band: float  # phi_over_r / conjectured
    half_ratio: float | None  # mu(B) / mu(B/2)
    proven: float | None  # C_eps (ln half_ratio)^(alpha-1-eps)
    reports: tuple[SobolevReport, ...] = field(repr=False, default=())


@dataclass(frozen=True)
class SuperradiusSweep:
    rows: tuple[SuperradiusRow, ...]
    alpha: float
    sigma: float | None
    epsilon: float | None
    slope: float  # d log(max ratio) / d log r
    expected_slope: float | None  # 1 - sigma alpha, when sigma alpha < 1
    phi_over_r_slope: float
    conjectured_slope: float
    proven_slope: float | None
    C_eps: float | None

    @property
    def radii(self) -> np.ndarray:
        return np.array([row.r for row in self.rows])

    def band_range(self) -> tuple[float, float]:
        b = [row.band for row in self.rows]
        return min(b), max(b)

    def proven_violations(self) -> list[float]:
        """Radii at which the measured ``phi(r)/r`` falls below the proven lower bound."""
        return [row.r for row in self.rows if row.proven is not None and row.phi_over_r < row.proven]

    def summary(self) -> dict:
        lo, hi = self.band_range()
        return {
            "alpha": self.alpha, "sigma": self.sigma, "epsilon": self.epsilon,
            "slope": self.slope, "expected_slope": self.expected_slope,
            "phi_over_r_slope": self.phi_over_r_slope, "conjectured_slope": self.conjectured_slope,
            "proven_slope": self.proven_slope, "C_eps": self.C_eps,
            "band_min": lo, "band_max": hi, "proven_violations": self.proven_violations(),
            "rows": [{k: v for k, v in asdict(row).items() if k != "reports"} for row in self.rows],
        }


def empirical_superradius(grid: MetricGrid, phi: YoungFunction, r_sweep, origin=None,
                          family=DEFAULT_FAMILY, gamma: float = 2.0, surrogate: str = "q",
                          epsilon: float | None = None, C_S: float = 1.0) -> SuperradiusSweep:
    """Per radius, the largest Sobolev ratio over the family, and its scaling in ``r``.

    ``alpha`` for the conjectured curve ``(ln mu(2B)/mu(B))^alpha`` and the
    proven bound is the log-power exponent of ``phi``, or the power ``p`` for
    power bumps. The proven bound (only with ``epsilon``) treats the measured
    maximal ratio as ``C_S phi(r)`` with the given ``C_S``.
    """
    radii = np.sort(np.asarray(r_sweep, dtype=float))
    if radii.size < 4:
        raise ContractError("the superradius fit needs at least 4 radii")
    if not family:
        raise ContractError("the test family is empty")
    alpha = phi.param
    rows = []
    for r in radii:
        fams = radial_family(grid, origin, r, members=family, gamma=gamma)
        reps = tuple(sobolev_ratio(w, grid, origin, r, phi, 1.0, surrogate, name) for name, w in fams.items())
        usable = [rp for rp in reps if math.isfinite(rp.ratio)]
        if not usable:
            continue
        best = max(usable, key=lambda rp: rp.ratio)
        mu_b = ball_measure(grid, origin, r)
        D = ball_measure(grid, origin, 2 * r) / mu_b
        conj = math.log(D) ** alpha
        half = proven = None
        if epsilon is not None:
            mu_half = ball_measure(grid, origin, r / 2)
            if mu_half > 0:
                half = mu_b / mu_half
                proven = superradius_lower_bound(alpha, epsilon, C_S, half).value
        por = best.ratio / r / C_S
        rows.append(SuperradiusRow(float(r), best.ratio, best.family, por, D, conj, por / conj,
                                   half, proven, reps))
    if len(rows) < 4:
        raise DegenerateInputError(f"only {len(rows)} usable radii (need 4)")
    rs = [row.r for row in rows]
    sigma = grid.profile.sigma
    expected = 1.0 - sigma * alpha if sigma is not None and sigma * alpha < 1 else None
    proven_vals = [row.proven for row in rows]
    proven_slope = loglog_slope(rs, proven_vals) if all(v and v > 0 for v in proven_vals) else None
    C_eps = superradius_lower_bound(alpha, epsilon, C_S, 2.0).C_eps if epsilon is not None else None
    return SuperradiusSweep(
        rows=tuple(rows), alpha=alpha, sigma=sigma, epsilon=epsilon,
        slope=loglog_slope(rs, [row.max_ratio for row in rows]),
        expected_slope=expected,
        phi_over_r_slope=loglog_slope(rs, [row.phi_over_r for row in rows]),
        conjectured_slope=loglog_slope(rs, [row.conjectured for row in rows]),
        proven_slope=proven_slope, C_eps=C_eps,
    )


REPORT_COLUMNS = ("r", "lhs", "rhs", "ratio", "family_member")


def write_reports_csv(reports, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(REPORT_COLUMNS)
        for rp in reports:
            wr.writerow([repr(rp.r), repr(rp.lhs), repr(rp.rhs), repr(rp.ratio), rp.family])
    return path
