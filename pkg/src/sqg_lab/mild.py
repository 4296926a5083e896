"""
Mild (Duhamel) formulation and the frequency-splitting fixed-point construction.

The initial datum is split into low modes ``a0`` (evolved by the exact
fractional heat semigroup) and a small high-mode tail ``b0``.  The
correction ``b`` is the fixed point of

    Psi(b)(t) = exp(-t |D|^{2a}) b0 - int_0^t exp(-(t-z)|D|^{2a}) div(u_{a+b} (a+b))(z) dz

found by Picard iteration from ``b = 0`` inside the ball ``B_r`` of the
space normed by ``sup_t ||.||_{X^{1-2a}} + int_0^T ||.||_{X^1}``.

Time integrals are trapezoidal sums over a uniform node set.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .spectral import Grid, SpectralField, _nonlinear_coeffs, require_alpha
from .xnorms import InequalityVerdict, xnorm, xnorm_coeffs

__all__ = [
    "TimeGrid",
    "FieldHistory",
    "SplitConfig",
    "PicardReport",
    "PicardError",
    "heat_propagate",
    "linear_l1x1_norm",
    "split_initial_data",
    "select_epsilon_and_T",
    "duhamel_integral",
    "duhamel_history",
    "psi_apply",
    "picard_solve",
    "check_duhamel_sup_bound",
    "check_duhamel_l1_bound",
]

log = logging.getLogger(__name__)

RATIO_ALLOWANCE = 0.05  # quadrature slack on the 1/2 contraction bound


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t1: float
    steps: int

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise ValueError(f"need t1 > t0, got [{self.t0}, {self.t1}]")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.steps

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps + 1)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.steps + 1, self.dt)
        w[0] = w[-1] = self.dt / 2
        return w


@dataclass(frozen=True, eq=False)
class FieldHistory:
    """Snapshots of a spectral field at every node of ``timegrid``, stacked on axis 0."""

    timegrid: TimeGrid
    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        shape = (self.timegrid.steps + 1, self.grid.n, self.grid.n)
        if self.coeffs.shape != shape:
            raise ValueError(f"history shape {self.coeffs.shape}, expected {shape}")

    @classmethod
    def from_fields(cls, timegrid: TimeGrid, fields) -> FieldHistory:
        fields = list(fields)
        if not fields:
            raise ValueError("empty history")
        grid = fields[0].grid
        if any(f.grid != grid for f in fields):
            raise ValueError("all snapshots must share one grid")
        return cls(timegrid, grid, np.stack([f.coeffs for f in fields]))

    @classmethod
    def zeros(cls, timegrid: TimeGrid, grid: Grid) -> FieldHistory:
        return cls(timegrid, grid, np.zeros((timegrid.steps + 1, grid.n, grid.n), dtype=complex))

    def __len__(self) -> int:
        return self.coeffs.shape[0]

    def __getitem__(self, i: int) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[i])

    @property
    def times(self) -> np.ndarray:
        return self.timegrid.times

    def _like(self, coeffs: np.ndarray) -> FieldHistory:
        return FieldHistory(self.timegrid, self.grid, coeffs)

    def __add__(self, other: FieldHistory) -> FieldHistory:
        return self._like(self.coeffs + other.coeffs)

    def __sub__(self, other: FieldHistory) -> FieldHistory:
        return self._like(self.coeffs - other.coeffs)

    def norms(self, sigma: float) -> np.ndarray:
        return xnorm_coeffs(self.coeffs, self.grid, sigma)

    def sup_norm(self, sigma: float) -> float:
        return float(self.norms(sigma).max())

    def l1_norm(self, sigma: float) -> float:
        return float(self.timegrid.trapezoid_weights() @ self.norms(sigma))

    def xt_norms(self, alpha: float) -> tuple[float, float]:
        """(sup_t ||.||_{X^{1-2a}}, int_0^T ||.||_{X^1})."""
        return self.sup_norm(1 - 2 * alpha), self.l1_norm(1.0)


# -- linear pieces -------------------------------------------------------------


def _decay_rate(grid: Grid, alpha: float) -> np.ndarray:
    return grid.symbol(2 * alpha)


def heat_propagate(f: SpectralField, t: float, alpha: float) -> SpectralField:
    """Apply the fractional heat semigroup exp(-t |D|^{2 alpha})."""
    if t < 0:
        raise ValueError(f"heat semigroup needs t >= 0, got {t}")
    alpha = require_alpha(alpha)
    return f.with_coeffs(np.exp(-t * _decay_rate(f.grid, alpha)) * f.coeffs)


def _heat_history(f: SpectralField, timegrid: TimeGrid, alpha: float) -> FieldHistory:
    mu = _decay_rate(f.grid, alpha)
    t = timegrid.times[:, None, None]
    return FieldHistory(timegrid, f.grid, np.exp(-t * mu) * f.coeffs)


def linear_l1x1_norm(f0: SpectralField, T: float, alpha: float) -> float:
    """Closed form of int_0^T ||exp(-t|D|^{2a}) f0||_{X^1} dt."""
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    alpha = require_alpha(alpha)
    g = f0.grid
    # (1 - exp(-T mu)) |xi|^{1-2a}, written with expm1 for small T mu
    weight = -np.expm1(-T * _decay_rate(g, alpha)) * g.symbol(1 - 2 * alpha)
    return float(g.dxi**2 * np.sum(weight * np.abs(f0.coeffs)))


# -- splitting and parameter choice ---------------------------------------------


class Split(NamedTuple):
    a0: SpectralField
    b0: SpectralField
    N: float


def split_initial_data(theta0: SpectralField, r: float, alpha: float) -> Split:
    """Low/high split at the smallest lattice radius whose tail is below r/5.

    Radii are searched over integer multiples of the lattice spacing.
    ``a0`` keeps ``|xi| <= N`` so that ``a0 + b0 == theta0`` exactly.
    """
    _require_r(r)
    alpha = require_alpha(alpha)
    g = theta0.grid
    weighted = g.symbol(1 - 2 * alpha) * np.abs(theta0.coeffs)
    radius = g.kmag / g.dxi
    # tail(m) = weighted mass strictly outside radius m; decreasing in m
    m_max = int(np.ceil(radius.max()))
    for m in range(m_max + 1):
        tail = g.dxi**2 * weighted[radius > m + 1e-9].sum()
        if tail < r / 5:
            break
    N = m * g.dxi
    low = radius <= m + 1e-9
    a0 = theta0.with_coeffs(np.where(low, theta0.coeffs, 0))
    b0 = theta0.with_coeffs(np.where(low, 0, theta0.coeffs))
    return Split(a0, b0, N)


@dataclass(frozen=True)
class SplitConfig:
    """Parameters of the local construction and the quantities they must control."""

    r: float
    N: float
    eps: float
    T: float
    alpha: float
    theta0_norm: float
    tail_norm: float
    a_l1_norm: float

    def conditions(self) -> dict[str, bool]:
        s, e, p = self.theta0_norm, self.eps, 1 / (2 * self.alpha)
        return {
            "r_range": 0 < self.r < 1 / 20,
            "tail": self.tail_norm < self.r / 5,
            "eps_linear": 4 * e * s < self.r / 5,
            "eps_interp": 2 * (s ** (1 - p) * e**p + s**p * e ** (1 - p)) < 1 / 5,
            "a_l1": self.a_l1_norm < e,
        }

    def check(self):
        bad = [k for k, ok in self.conditions().items() if not ok]
        if bad:
            raise AssertionError(f"split configuration violates {bad}: {self}")

    def to_dict(self) -> dict:
        return {**asdict(self), "conditions": self.conditions()}


def _require_r(r: float):
    if not (0 < r < 1 / 20):
        raise ValueError(f"r must satisfy 0<r<1/20, got {r}")


def _bisect_below(fn, target: float, lo: float, hi: float, what: str, iters: int = 200) -> float:
    """Largest-found x in [lo, hi] with fn(x) < target, for increasing fn with fn(lo) < target <= fn(hi)."""
    f_lo, f_hi = fn(lo), fn(hi)
    if not (f_lo < target <= f_hi):
        raise RuntimeError(f"{what}: bisection bracket invalid, f({lo:g})={f_lo:g}, f({hi:g})={f_hi:g}, target={target:g}")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    else:
        raise RuntimeError(f"{what}: bisection did not converge, bracket [{lo:g}, {hi:g}]")
    return lo


def _eps_interp_bound(s: float, alpha: float) -> float:
    """Root of 2 (s^{1-p} e^p + s^p e^{1-p}) = 1/5, the left side increasing in e."""
    p = 1 / (2 * alpha)

    def h(e):
        return 2 * (s ** (1 - p) * e**p + s**p * e ** (1 - p))

    hi = 1.0
    while h(hi) < 0.2:
        hi *= 2
    lo = 0.0
    return _bisect_below(h, 0.2, lo, hi, "epsilon bound")


def select_epsilon_and_T(
    theta0: SpectralField,
    a0: SpectralField,
    r: float,
    alpha: float,
    N: float = float("nan"),
    t_max: float = 1.0,
    safety: float = 0.99,
) -> SplitConfig:
    """Pick eps just inside both smallness conditions, then the largest T <= t_max
    with ``int_0^T ||exp(-t|D|^{2a}) a0||_{X^1} < eps``."""
    _require_r(r)
    alpha = require_alpha(alpha)
    s = xnorm(theta0, 1 - 2 * alpha)
    tail = xnorm(theta0 - a0, 1 - 2 * alpha)
    if s == 0:
        return SplitConfig(r, N, r, t_max, alpha, 0.0, tail, 0.0)

    eps = safety * min(r / (20 * s), _eps_interp_bound(s, alpha))

    def g(T):
        return linear_l1x1_norm(a0, T, alpha)

    if g(t_max) < eps:
        T = t_max
    else:
        T = _bisect_below(g, eps, 0.0, t_max, "time horizon")
    if not T > 0:
        raise RuntimeError(f"time horizon collapsed to {T} (eps={eps:g}, ||a0||={xnorm(a0, 1 - 2 * alpha):g})")
    return SplitConfig(r, N, eps, T, alpha, s, tail, g(T))


# -- Duhamel integrals -----------------------------------------------------------


def _forcing(history: FieldHistory, forcing: FieldHistory | None) -> np.ndarray:
    if forcing is None:
        return _nonlinear_coeffs(history.coeffs, history.grid)
    if forcing.coeffs.shape != history.coeffs.shape:
        raise ValueError("forcing history does not match")
    return forcing.coeffs


def duhamel_integral(
    history: FieldHistory,
    t_index: int,
    alpha: float,
    forcing: FieldHistory | None = None,
) -> SpectralField:
    """Trapezoidal value of int_0^{t_i} exp(-(t_i - z)|D|^{2a}) F(z) dz.

    ``F`` defaults to div(theta u_theta) evaluated on ``history``; pass
    ``forcing`` to integrate a prescribed integrand instead.
    """
    if len(history) == 0:
        raise ValueError("empty history")
    alpha = require_alpha(alpha)
    if not 0 <= t_index < len(history):
        raise IndexError(f"t_index {t_index} outside history of length {len(history)}")
    if t_index == 0:
        return SpectralField.zeros(history.grid)
    tg = history.timegrid
    sub = FieldHistory(TimeGrid(tg.t0, tg.t0 + t_index * tg.dt, t_index), history.grid, history.coeffs[: t_index + 1])
    F = _forcing(sub, None if forcing is None else FieldHistory(sub.timegrid, sub.grid, forcing.coeffs[: t_index + 1]))
    mu = _decay_rate(history.grid, alpha)
    lag = (sub.times[-1] - sub.times)[:, None, None]
    w = sub.timegrid.trapezoid_weights()[:, None, None]
    return SpectralField(history.grid, np.sum(w * np.exp(-lag * mu) * F, axis=0))


def duhamel_history(history: FieldHistory, alpha: float, forcing: FieldHistory | None = None) -> FieldHistory:
    """:func:`duhamel_integral` at every node, by the O(nodes) recursion
    S_i = E S_{i-1} + dt F_i on the full-weight sums."""
    alpha = require_alpha(alpha)
    F = _forcing(history, forcing)
    mu = _decay_rate(history.grid, alpha)
    tg = history.timegrid
    dt = tg.dt
    E = np.exp(-dt * mu)
    out = np.zeros_like(F)
    S = dt * F[0]
    for i in range(1, len(history)):
        S = E * S + dt * F[i]
        out[i] = S - 0.5 * dt * (np.exp(-(tg.times[i] - tg.t0) * mu) * F[0] + F[i])
    return FieldHistory(tg, history.grid, out)


def psi_apply(b: FieldHistory, a: FieldHistory, b0: SpectralField, alpha: float) -> FieldHistory:
    """Evaluate the fixed-point map on the correction history ``b``.

    u_{a+b} is linear in a+b, so (u_a+u_b).grad(a+b) = div(u_{a+b}(a+b)).
    """
    if b.timegrid != a.timegrid or b.grid != a.grid or b0.grid != a.grid:
        raise ValueError("grid mismatch between a, b and b0")
    linear = _heat_history(b0, b.timegrid, alpha)
    return linear - duhamel_history(a + b, alpha)


# -- Picard iteration ------------------------------------------------------------


@dataclass
class PicardReport:
    split: SplitConfig
    iterations: int = 0
    residuals: list = field(default_factory=list)
    contraction_ratios: list = field(default_factory=list)
    final_sup_norm: float = float("nan")
    final_l1_norm: float = float("nan")
    restarts: int = 0
    converged: bool = False
    nodes: int = 0

    @property
    def max_ratio(self) -> float:
        return max(self.contraction_ratios, default=0.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["split"] = self.split.to_dict()
        d["max_ratio"] = self.max_ratio
        return d


class PicardError(RuntimeError):
    def __init__(self, message: str, report: PicardReport):
        super().__init__(message)
        self.report = report


def _xt_distance(h: FieldHistory, alpha: float) -> float:
    sup, l1 = h.xt_norms(alpha)
    return sup + l1


def picard_solve(
    theta0: SpectralField,
    r: float,
    alpha: float,
    max_iter: int = 50,
    tol: float = 1e-10,
    nodes: int = 64,
    t_max: float = 1.0,
    max_restarts: int = 5,
) -> tuple[FieldHistory, PicardReport]:
    """Local mild solution theta = a + b on [0, T] by Picard iteration for b.

    If an iterate leaves B_r the horizon is halved and the iteration restarted
    (at most ``max_restarts`` times).  Raises :class:`PicardError` if the
    iteration exhausts ``max_iter`` or keeps escaping the ball.
    """
    _require_r(r)
    alpha = require_alpha(alpha)
    if nodes < 2:
        raise ValueError("need at least two time nodes")
    if not theta0.is_zero_mean():
        raise ValueError("initial data must be zero-mean")
    a0, b0, N = split_initial_data(theta0, r, alpha)
    split = select_epsilon_and_T(theta0, a0, r, alpha, N=N, t_max=t_max)
    split.check()

    restarts = 0
    while True:
        tg = TimeGrid(0.0, split.T, nodes - 1)
        report = PicardReport(split=split, restarts=restarts, nodes=nodes)
        a = _heat_history(a0, tg, alpha)
        b = FieldHistory.zeros(tg, theta0.grid)
        escaped = None
        for k in range(1, max_iter + 1):
            b_next = psi_apply(b, a, b0, alpha)
            res = _xt_distance(b_next - b, alpha)
            if report.residuals and report.residuals[-1] > 0:
                report.contraction_ratios.append(res / report.residuals[-1])
            report.residuals.append(res)
            report.iterations = k
            b = b_next
            sup, l1 = b.xt_norms(alpha)
            report.final_sup_norm, report.final_l1_norm = sup, l1
            if sup > r or l1 > r:
                escaped = [name for name, v in (("sup X^{1-2a}", sup), ("L1 X^1", l1)) if v > r]
                break
            if res < tol:
                report.converged = True
                return a + b, report
        if escaped is None:
            raise PicardError(f"no convergence after {max_iter} iterations (last residual {res:.3e})", report)
        if restarts >= max_restarts:
            raise PicardError(f"iterate left B_r through {escaped} after {restarts} horizon halvings", report)
        restarts += 1
        log.info("iterate escaped B_r through %s; halving T to %g", escaped, split.T / 2)
        split = SplitConfig(
            split.r, split.N, split.eps, split.T / 2, alpha, split.theta0_norm, split.tail_norm,
            linear_l1x1_norm(a0, split.T / 2, alpha),
        )


# -- bound checkers ----------------------------------------------------------------


def check_duhamel_sup_bound(history: FieldHistory, alpha: float) -> InequalityVerdict:
    """sup_t ||Duhamel(theta)(t)||_{X^{1-2a}} <= 4 ||theta||_{L^inf X^{1-2a}} ||theta||_{L^1 X^1}."""
    alpha = require_alpha(alpha)
    D = duhamel_history(history, alpha)
    sup, l1 = history.xt_norms(alpha)
    return InequalityVerdict(D.sup_norm(1 - 2 * alpha), 4 * sup * l1)


def check_duhamel_l1_bound(history: FieldHistory, alpha: float) -> InequalityVerdict:
    """int_0^T ||Duhamel(theta)(t)||_{X^1} dt <= 4 ||theta||_{L^inf X^{1-2a}} ||theta||_{L^1 X^1}."""
    alpha = require_alpha(alpha)
    D = duhamel_history(history, alpha)
    sup, l1 = history.xt_norms(alpha)
    return InequalityVerdict(D.l1_norm(1.0), 4 * sup * l1)
