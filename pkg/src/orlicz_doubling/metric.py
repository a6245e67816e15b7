"""Discretized subunit geometry for ``Q = diag(1, f(x)^2)`` on ``[-a, a]^2``.

The subunit metric is realized as a graph shortest-path metric on the grid
nodes. An edge from node ``(i, j)`` to ``(i + di, j + dj)`` costs
``sqrt(dx^2 + (dy / f(x_mid))^2)`` with ``f`` evaluated at the x-midpoint of
the step; the stencil has 16 neighbors (axis, diagonal and knight moves),
or optionally 32 (adding the (1, 3) and (2, 3) families).

Nodes sit at ``x_i = -a + i h`` with ``h = 2a / n``, so ``x = 0`` is a node for
even ``n``. Along ``y`` the nodes are optionally graded toward the axis with
``y = a sinh(beta s) / sinh(beta)`` for uniform ``s`` in ``[-1, 1]``: the balls
of the exponentially degenerate profile are extremely thin in ``y`` and a
uniform ``y`` spacing cannot resolve them. Each node carries the area of its
dual cell, and the measure of a set of nodes is the sum of those areas.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize_scalar
from scipy.sparse.csgraph import dijkstra

from .errors import ContractError, DegenerateInputError, DomainError

__all__ = [
    "ProfileKind",
    "DegeneracyProfile",
    "MetricGrid",
    "STENCIL",
    "STENCIL_32",
    "DEFAULT_Y_STRETCH",
    "distance_field",
    "ball_measure",
    "volume_asymptotic",
    "doubling_ratio",
    "DoublingFit",
    "fit_doubling_exponent",
    "log_doubling_exponent_fit",
    "q_gradient",
    "export_field_csv",
]

# Half of the undirected 16-neighbor stencil; each offset is used in both directions.
STENCIL: tuple[tuple[int, int], ...] = (
    (1, 0), (0, 1), (1, 1), (1, -1), (1, 2), (1, -2), (2, 1), (2, -1),
)
# Extra offsets for the 32-neighbor stencil: worst-case distance bias drops from ~2.7% to ~1.3%.
STENCIL_32: tuple[tuple[int, int], ...] = STENCIL + (
    (1, 3), (1, -3), (3, 1), (3, -1), (2, 3), (2, -3), (3, 2), (3, -2),
)
_STENCILS = {16: STENCIL, 32: STENCIL_32}

DEFAULT_Y_STRETCH = 16.0


class ProfileKind(str, enum.Enum):
    EXP_POWER = "exp-power"
    EUCLIDEAN = "euclidean"


@dataclass(frozen=True)
class DegeneracyProfile:
    """``f(x) = exp(-1/|x|^sigma)`` (exp-power) or ``f = 1`` (euclidean)."""

    kind: ProfileKind = ProfileKind.EUCLIDEAN
    sigma: float | None = None

    def __post_init__(self):
        kind = ProfileKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is ProfileKind.EXP_POWER:
            s = float(self.sigma) if self.sigma is not None else math.nan
            if not 0.0 < s <= 1.0:
                # sigma = 1 is the limiting case used for the r^4 e^{-1/r} example
                raise DomainError(f"exp-power profile requires 0 < sigma <= 1, got {self.sigma!r}")
            object.__setattr__(self, "sigma", s)
        else:
            object.__setattr__(self, "sigma", None)

    @classmethod
    def exp_power(cls, sigma: float) -> "DegeneracyProfile":
        return cls(ProfileKind.EXP_POWER, sigma)

    @classmethod
    def euclidean(cls) -> "DegeneracyProfile":
        return cls(ProfileKind.EUCLIDEAN)

    @property
    def is_degenerate(self) -> bool:
        return self.kind is ProfileKind.EXP_POWER

    def f(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        if self.kind is ProfileKind.EUCLIDEAN:
            out = np.ones_like(x)
        else:
            out = np.zeros_like(x)
            m = x > 0
            out[m] = np.exp(-(x[m] ** -self.sigma))
        return out if out.ndim else float(out)

    def F(self, x):
        """``-ln f(x) = |x|^-sigma``."""
        if not self.is_degenerate:
            raise ContractError("F is only defined for the exp-power profile")
        x = np.abs(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            out = x**-self.sigma
        return out if out.ndim else float(out)

    def F_prime_abs(self, r):
        """``|F'(r)| = sigma r^-(sigma + 1)``."""
        if not self.is_degenerate:
            raise ContractError("F is only defined for the exp-power profile")
        r = np.asarray(r, dtype=float)
        out = self.sigma * r ** (-self.sigma - 1.0)
        return out if out.ndim else float(out)

    def describe(self) -> str:
        if self.is_degenerate:
            return f"ExpPower(sigma={self.sigma:g})"
        return "Euclidean"


def _symmetric(v: np.ndarray) -> np.ndarray:
    return 0.5 * (v - v[::-1])


def _dual_widths(v: np.ndarray) -> np.ndarray:
    e = np.diff(v)
    w = np.zeros_like(v)
    w[:-1] += 0.5 * e
    w[1:] += 0.5 * e
    return w


class MetricGrid:
    """Node grid on ``[-a, a]^2`` with a degeneracy profile and lazily computed distance fields.

    Fields on the grid are arrays of shape ``(n + 1, n + 1)`` indexed ``[i, j]``
    with ``i`` along ``x`` and ``j`` along ``y``.
    """

    def __init__(self, half_width: float = 1.0, n: int = 256,
                 profile: DegeneracyProfile | None = None, y_stretch: float | None = None,
                 neighbors: int = 16):
        if not half_width > 0:
            raise DomainError("half_width must be positive")
        if int(n) != n or n < 4 or n % 2:
            raise ContractError(f"n must be an even integer >= 4, got {n!r}")
        if neighbors not in _STENCILS:
            raise ContractError(f"neighbors must be 16 or 32, got {neighbors!r}")
        self.neighbors = int(neighbors)
        self.half_width = float(half_width)
        self.n = int(n)
        self.profile = profile if profile is not None else DegeneracyProfile.euclidean()
        if y_stretch is None:
            y_stretch = DEFAULT_Y_STRETCH if self.profile.is_degenerate else 0.0
        if y_stretch < 0:
            raise DomainError("y_stretch must be >= 0")
        self.y_stretch = float(y_stretch)

        a, N = self.half_width, self.n + 1
        s = _symmetric(np.linspace(-1.0, 1.0, N))
        self.x = a * s
        if self.y_stretch > 0:
            self.y = _symmetric(a * np.sinh(self.y_stretch * s) / math.sinh(self.y_stretch))
        else:
            self.y = self.x.copy()
        self.f_x = np.asarray(self.profile.f(self.x), dtype=float)
        self.cell_area = np.outer(_dual_widths(self.x), _dual_widths(self.y))
        for arr in (self.x, self.y, self.f_x, self.cell_area):
            arr.setflags(write=False)
        self._fields: dict[tuple[int, int], np.ndarray] = {}

    def __repr__(self) -> str:
        return (f"MetricGrid(half_width={self.half_width:g}, n={self.n}, "
                f"profile={self.profile.describe()}, y_stretch={self.y_stretch:g}, "
                f"neighbors={self.neighbors})")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n + 1, self.n + 1)

    @property
    def center(self) -> tuple[int, int]:
        return (self.n // 2, self.n // 2)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return X, Y

    def node_nearest(self, x: float, y: float) -> tuple[int, int]:
        return int(np.abs(self.x - x).argmin()), int(np.abs(self.y - y).argmin())

    def check_origin(self, origin) -> tuple[int, int]:
        if origin is None:
            return self.center
        try:
            i, j = (int(v) for v in origin)
        except (TypeError, ValueError):
            raise ContractError(f"origin must be a pair of node indices, got {origin!r}") from None
        if not (0 <= i <= self.n and 0 <= j <= self.n):
            raise ContractError(f"origin {origin!r} outside the grid 0..{self.n}")
        return i, j

    def max_radius(self, origin=None) -> float:
        """Largest radius whose ball is guaranteed to stay inside the domain.

        ``f <= 1`` makes the subunit distance dominate the Euclidean one, so the
        Euclidean disc bound is sufficient.
        """
        i, j = self.check_origin(origin)
        return self.half_width - max(abs(self.x[i]), abs(self.y[j]))

    @cached_property
    def stencil(self) -> list[tuple[int, int, np.ndarray]]:
        """Edge costs per offset: ``cost[i, j]`` is the cost from ``(i, j)`` to ``(i + di, j + dj)``.

        Non-traversable edges (``f = 0`` at the midpoint with ``dy != 0``) are ``inf``.
        """
        N = self.n + 1
        out = []
        for di, dj in _STENCILS[self.neighbors]:
            i0 = np.arange(0, N - di)
            j0 = np.arange(max(0, -dj), N - max(0, dj))
            dx = (self.x[i0 + di] - self.x[i0])[:, None]
            dy = (self.y[j0 + dj] - self.y[j0])[None, :]
            if dj == 0:
                cost = np.broadcast_to(np.abs(dx), (i0.size, j0.size)).copy()
            else:
                fm = np.asarray(self.profile.f(0.5 * (self.x[i0 + di] + self.x[i0])))[:, None]
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    cost = np.hypot(dx, np.abs(dy) / fm)
                cost[~np.isfinite(cost)] = np.inf
            cost.setflags(write=False)
            out.append((di, dj, cost))
        return out

    def edge_slices(self, di: int, dj: int):
        """Source and target index slices matching ``stencil`` cost arrays."""
        N = self.n + 1
        src = (slice(0, N - di), slice(max(0, -dj), N - max(0, dj)))
        dst = (slice(di, N), slice(max(0, -dj) + dj, N - max(0, dj) + dj))
        return src, dst

    @cached_property
    def graph(self) -> sp.csr_matrix:
        N = self.n + 1
        idx = np.arange(N * N).reshape(N, N)
        rows, cols, vals = [], [], []
        for di, dj, cost in self.stencil:
            src, dst = self.edge_slices(di, dj)
            ok = np.isfinite(cost)
            a, b, c = idx[src][ok], idx[dst][ok], cost[ok]
            rows += [a, b]
            cols += [b, a]
            vals += [c, c]
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N * N, N * N)
        )

    def distance_field(self, origin=None) -> np.ndarray:
        key = self.check_origin(origin)
        d = self._fields.get(key)
        if d is None:
            N = self.n + 1
            d = dijkstra(self.graph, directed=True, indices=key[0] * N + key[1]).reshape(N, N)
            d.setflags(write=False)
            self._fields[key] = d
        return d

    def partials(self, w) -> tuple[np.ndarray, np.ndarray]:
        """Central differences of a node field, one-sided on the boundary."""
        w = self._check_field(w)
        return np.gradient(w, self.x, axis=0), np.gradient(w, self.y, axis=1)

    def _check_field(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != self.shape:
            raise ContractError(f"field has shape {w.shape}, grid expects {self.shape}")
        return w


def distance_field(grid: MetricGrid, origin=None) -> np.ndarray:
    """Graph distance from ``origin`` (node indices, default the center) to every node."""
    return grid.distance_field(origin)


def _check_radius(grid: MetricGrid, origin, r: float) -> float:
    r = float(r)
    if not r >= 0 or math.isinf(r):
        raise DomainError(f"radius must be finite and >= 0, got {r!r}")
    bound = grid.max_radius(origin)
    if r > bound * (1 + 1e-12):
        raise ContractError(f"radius {r:g} exceeds the domain bound {bound:g} for this origin")
    return r


def ball_measure(grid: MetricGrid, origin=None, r: float = 0.0) -> float:
    """Area of the nodes with ``d(node, origin) < r``."""
    r = _check_radius(grid, origin, r)
    if r == 0.0:
        return 0.0
    d = grid.distance_field(origin)
    return float(grid.cell_area[d < r].sum())


def volume_asymptotic(profile: DegeneracyProfile, r):
    """Closed-form ball volume: ``r^(2(sigma+1)) exp(-1/r^sigma)``; ``pi r^2`` for the euclidean profile."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("volume_asymptotic requires r > 0")
    if profile.is_degenerate:
        s = profile.sigma
        out = r ** (2.0 * (s + 1.0)) * np.exp(-(r**-s))
    else:
        out = math.pi * r**2
    return out if out.ndim else float(out)


def doubling_ratio(grid: MetricGrid, origin=None, r: float = 0.0) -> float:
    """``mu(B(2r)) / mu(B(r))``."""
    inner = ball_measure(grid, origin, r)
    if inner <= 0:
        raise DegenerateInputError(f"ball of radius {r:g} contains no grid mass")
    return ball_measure(grid, origin, 2.0 * r) / inner


@dataclass(frozen=True)
class DoublingFit:
    """Result of fitting the divergence exponent of ``ln(mu(2B)/mu(B))``.

    ``sigma_hat`` comes from the model
    ``ln D(r) = 2(sigma+1) ln 2 + (1 - 2^-sigma) r^-sigma + c1 r``, i.e. the
    closed-form volume with a first-order correction to its prefactor.
    ``raw_sigma`` is minus the plain least-squares slope of ``ln ln D``
    against ``ln r``.
    """

    radii: np.ndarray
    ratios: np.ndarray
    used: np.ndarray
    dropped: tuple[float, ...]
    divergent: bool
    verdict: str
    sigma_hat: float | None
    raw_sigma: float
    correction: float | None
    growth: float

    def to_dict(self) -> dict:
        return {
            "radii": [float(r) for r in self.radii],
            "ratios": [float(v) for v in self.ratios],
            "dropped": list(self.dropped),
            "divergent": self.divergent,
            "verdict": self.verdict,
            "sigma_hat": self.sigma_hat,
            "raw_sigma": self.raw_sigma,
            "correction": self.correction,
            "growth": self.growth,
        }


# relative growth of ln D across the sweep below which the data is treated as doubling
DIVERGENCE_GROWTH = 0.05


def _is_geometric(r: np.ndarray) -> bool:
    q = r[1:] / r[:-1]
    return bool(np.all(q > 0) and np.allclose(q, q[0], rtol=1e-6))


def fit_doubling_exponent(radii, ratios, sigma_bounds=(0.02, 3.0)) -> DoublingFit:
    """Fit the divergence exponent from doubling ratios on a geometric radius sweep."""
    r = np.asarray(radii, dtype=float)
    D = np.asarray(ratios, dtype=float)
    if r.shape != D.shape or r.ndim != 1:
        raise ContractError("radii and ratios must be 1-d arrays of equal length")
    if r.size < 4:
        raise ContractError("the doubling fit needs at least 4 radii")
    if not _is_geometric(np.sort(r)):
        raise ContractError("radii must be geometrically spaced")
    ok = np.isfinite(D) & (D > 1.0)
    dropped = tuple(float(v) for v in r[~ok])
    if ok.sum() < 3:
        raise DegenerateInputError(f"only {int(ok.sum())} usable doubling ratios (need 3)")
    ru, L = r[ok], np.log(D[ok])
    lr = np.log(ru)

    raw_slope = np.polyfit(lr, np.log(L), 1)[0]
    trend = np.polyfit(lr, L, 1)
    # fitted change of ln D from the largest to the smallest radius, relative to its mean
    growth = float((np.polyval(trend, lr.min()) - np.polyval(trend, lr.max())) / L.mean())
    divergent = growth > DIVERGENCE_GROWTH

    sigma_hat = correction = None
    if divergent:
        def resid(s):
            res = L - (2.0 * (s + 1.0) * math.log(2.0) + (1.0 - 2.0**-s) * ru**-s)
            c1 = float(res @ ru / (ru @ ru))
            return res - c1 * ru, c1

        def sse(s):
            return float(np.sum(resid(s)[0] ** 2))

        lo, hi = sigma_bounds
        scan = np.linspace(lo, hi, 600)
        k = int(np.argmin([sse(s) for s in scan]))
        step = scan[1] - scan[0]
        best = minimize_scalar(sse, bounds=(max(lo, scan[k] - step), min(hi, scan[k] + step)),
                               method="bounded", options={"xatol": 1e-10})
        sigma_hat = float(best.x)
        correction = resid(sigma_hat)[1]

    return DoublingFit(
        radii=r, ratios=D, used=ru, dropped=dropped, divergent=divergent,
        verdict="non-doubling" if divergent else "doubling",
        sigma_hat=sigma_hat, raw_sigma=float(-raw_slope), correction=correction, growth=growth,
    )


def log_doubling_exponent_fit(grid: MetricGrid, r_sweep, origin=None) -> DoublingFit:
    """Measure doubling ratios on the grid along ``r_sweep`` and fit their divergence exponent."""
    r = np.asarray(r_sweep, dtype=float)
    if r.size < 4:
        raise ContractError("the doubling fit needs at least 4 radii")
    ratios = []
    for rr in r:
        try:
            ratios.append(doubling_ratio(grid, origin, rr))
        except DegenerateInputError:
            ratios.append(math.nan)
    return fit_doubling_exponent(r, np.array(ratios))


def q_gradient(w, grid: MetricGrid) -> np.ndarray:
    """``[grad w]_Q = sqrt(w_x^2 + f(x)^2 w_y^2)`` by central differences."""
    gx, gy = grid.partials(w)
    return np.hypot(gx, grid.f_x[:, None] * gy)


def export_field_csv(grid: MetricGrid, path, origin=None, field: np.ndarray | None = None) -> Path:
    """Write ``x, y, d`` rows (or ``x, y, value`` for a supplied field)."""
    values = grid.distance_field(origin) if field is None else grid._check_field(field)
    X, Y = grid.coords
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "d" if field is None else "value"])
        for xv, yv, dv in zip(X.ravel(), Y.ravel(), values.ravel()):
            wr.writerow([repr(float(xv)), repr(float(yv)), repr(float(dv))])
    return path
