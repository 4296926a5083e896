"""
Weighted Fourier-l1 norms ``||f||_s = dxi**2 * sum |xi|**s |fhat(xi)|`` and
checkers for the interpolation and product inequalities they satisfy.

Every checker returns :class:`InequalityVerdict` objects instead of raising,
so fuzzing drivers can collect worst-case slack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .spectral import Grid, SpectralField, VelocityField, dealiased_product, require_alpha

__all__ = [
    "xnorm",
    "xnorm_coeffs",
    "InequalityVerdict",
    "InterpolationVerdicts",
    "ProductVerdicts",
    "check_interpolation",
    "check_product",
    "random_field",
    "fuzz_inequalities",
]

REL_TOL = 1e-10


def xnorm_coeffs(coeffs: np.ndarray, grid: Grid, sigma: float) -> np.ndarray:
    """Norm of each ``(n, n)`` slab of a (possibly stacked) array of moduli or coefficients."""
    mod = np.abs(coeffs)
    if sigma < 0 and np.any(mod[..., 0, 0] > 1e-13 * mod.max(axis=(-2, -1))):
        raise ValueError(f"X^{sigma:g} norm needs zero-mean fields (|xi|^sigma is singular at 0)")
    w = grid.symbol(sigma)
    return grid.dxi**2 * np.einsum("...ij,ij->...", mod, w)


def xnorm(f: SpectralField | VelocityField, sigma: float) -> float:
    """``||f||_{X^sigma}``; vector fields use the Euclidean modulus per mode."""
    mod = f.magnitude() if isinstance(f, VelocityField) else f.coeffs
    return float(xnorm_coeffs(mod, f.grid, sigma))


@dataclass(frozen=True)
class InequalityVerdict:
    """Outcome of checking ``lhs <= rhs`` up to a relative roundoff allowance."""

    lhs: float
    rhs: float
    slack: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "slack", float(self.rhs - self.lhs))
        tol = REL_TOL * max(1.0, abs(self.rhs))
        object.__setattr__(self, "passed", bool(self.slack >= -tol))

    @property
    def relative_slack(self) -> float:
        return self.slack / max(1.0, abs(self.rhs))

    def to_dict(self, **extra) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "slack": self.slack, "passed": self.passed, **extra}


class InterpolationVerdicts(NamedTuple):
    upper: InequalityVerdict  # bound on the X^{2-2alpha} norm
    zeroth: InequalityVerdict  # bound on the X^0 norm


class ProductVerdicts(NamedTuple):
    split: InequalityVerdict
    interpolated: InequalityVerdict
    square: InequalityVerdict


def _norm_triplet(f: SpectralField, alpha: float) -> tuple[float, float]:
    return xnorm(f, 1 - 2 * alpha), xnorm(f, 1.0)


def check_interpolation(f: SpectralField, alpha: float) -> InterpolationVerdicts:
    """Hoelder interpolation of X^{2-2a} and X^0 between X^{1-2a} and X^1."""
    alpha = require_alpha(alpha)
    p = 1 / (2 * alpha)
    low, high = _norm_triplet(f, alpha)
    upper = InequalityVerdict(xnorm(f, 2 - 2 * alpha), low ** (1 - p) * high**p)
    zeroth = InequalityVerdict(xnorm(f, 0.0), low**p * high ** (1 - p))
    return InterpolationVerdicts(upper, zeroth)


def check_product(f: SpectralField, g: SpectralField, alpha: float) -> ProductVerdicts:
    """Product bounds in X^{2-2a}, using the exact (padded, untruncated) product."""
    alpha = require_alpha(alpha)
    p = 1 / (2 * alpha)
    s = 2 - 2 * alpha
    fg = dealiased_product(f, g, pad=True)
    ff = dealiased_product(f, f, pad=True)
    lhs = xnorm(fg, s)

    f_s, f_0 = xnorm(f, s), xnorm(f, 0.0)
    g_s, g_0 = xnorm(g, s), xnorm(g, 0.0)
    split = InequalityVerdict(lhs, 2 * f_s * g_0 + 2 * f_0 * g_s)

    fl, fh = _norm_triplet(f, alpha)
    gl, gh = _norm_triplet(g, alpha)
    interp_rhs = 2 * fl ** (1 - p) * fh**p * gl**p * gh ** (1 - p) + 2 * fl**p * fh ** (1 - p) * gl ** (1 - p) * gh**p
    interpolated = InequalityVerdict(lhs, interp_rhs)

    square = InequalityVerdict(xnorm(ff, s), 4 * fl * fh)
    return ProductVerdicts(split, interpolated, square)


def random_field(
    grid: Grid,
    rng: np.random.Generator,
    kmin: float = 0.0,
    kmax: float | None = None,
    decades: float = 4.0,
) -> SpectralField:
    """Random real zero-mean field below the dealiasing cutoff.

    Magnitudes are log-uniform over ``decades`` decades, phases uniform.
    ``kmin``/``kmax`` restrict the support to a shell in wavenumber units.
    """
    n = grid.n
    j = grid.freqs
    support = grid.dealias_mask & (grid.kmag >= kmin) & (grid.kmag > 0)
    if kmax is not None:
        support &= grid.kmag <= kmax
    # keep one representative of each +-xi pair, mirror the rest
    upper = (j[None, :] > 0) | ((j[None, :] == 0) & (j[:, None] > 0))
    mag = 10.0 ** rng.uniform(-decades, 0.0, size=(n, n))
    phase = rng.uniform(0.0, 2 * np.pi, size=(n, n))
    c = np.where(support & upper, mag * np.exp(1j * phase), 0.0)
    c = c + np.conj(c[grid.neg_index][:, grid.neg_index])
    if not np.any(c):
        raise ValueError(f"empty support for shell [{kmin}, {kmax}] on n={n}")
    return SpectralField(grid, c)


@dataclass
class FuzzSummary:
    trials: int = 0
    checks: int = 0
    worst_relative_slack: float = np.inf
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def record(self, name: str, verdict: InequalityVerdict, alpha: float, seed: int):
        self.checks += 1
        self.worst_relative_slack = min(self.worst_relative_slack, verdict.relative_slack)
        if not verdict.passed:
            self.violations.append(verdict.to_dict(inequality=name, alpha=alpha, seed=seed))

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "checks": self.checks,
            "worst_relative_slack": self.worst_relative_slack,
            "violations": self.violations,
        }


def fuzz_inequalities(
    trials: int,
    alphas=(0.55, 0.6, 0.75, 0.9, 1.0),
    n: int = 8,
    seed: int = 0,
) -> FuzzSummary:
    """Run every interpolation and product check on ``trials`` random pairs per alpha.

    Trial ``i`` draws from ``default_rng([seed, i])`` so any failure can be
    replayed in isolation.
    """
    grid = Grid(n)
    out = FuzzSummary()
    for alpha in alphas:
        for i in range(trials):
            rng = np.random.default_rng([seed, i])
            f = random_field(grid, rng)
            g = random_field(grid, rng)
            for name, v in zip(("interp_upper", "interp_zeroth"), check_interpolation(f, alpha)):
                out.record(name, v, alpha, i)
            for name, v in zip(("product_split", "product_interp", "product_square"), check_product(f, g, alpha)):
                out.record(name, v, alpha, i)
            out.trials += 1
    return out
