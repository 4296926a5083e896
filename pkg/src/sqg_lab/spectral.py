"""
Periodic Fourier lattice, spectral fields and pseudo-spectral kernels.

Coefficient convention
----------------------
A field sampled on an ``n x n`` grid of period ``L`` is represented by
coefficients ``fhat`` on the lattice ``xi = dxi * (j, k)`` with
``dxi = 2*pi/L`` and ``j, k`` the signed FFT frequencies in ``[-n/2, n/2)``:

    f(x) = dxi**2 * sum_xi fhat(xi) * exp(i xi . x)

The forward map is the lattice quadrature of ``(2*pi)**-2 * int exp(-i x.xi) f dx``.
With this placement the transform of a product is exactly the
quadrature of the continuous convolution,

    (f g)^(xi) = dxi**2 * sum_eta fhat(eta) ghat(xi - eta),

so weighted-l1 norms ``dxi**2 * sum |xi|**s |fhat|`` obey Young's inequality
with constant one, as on the whole plane.

Coefficients are stored on the full ``(n, n)`` lattice (axis 0 <-> xi_1,
axis 1 <-> xi_2) so Hermitian symmetry is explicit; the transform kernels
internally work on the non-redundant half spectrum with real FFTs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "SpectralField",
    "VelocityField",
    "make_grid",
    "require_alpha",
    "fractional_laplacian_apply",
    "riesz_velocity",
    "dealiased_product",
    "nonlinear_term",
    "advection_term",
    "embed",
]

_MEAN_TOL = 1e-13


def require_alpha(alpha: float) -> float:
    """Validate the dissipation exponent; the model is sub-critical only for 1/2 < alpha <= 1."""
    alpha = float(alpha)
    if not (0.5 < alpha <= 1.0):
        raise ValueError(f"alpha must satisfy 1/2 < alpha <= 1, got {alpha}")
    return alpha


@dataclass(frozen=True)
class Grid:
    """Square periodic lattice with ``n`` modes per dimension and period ``L``."""

    n: int
    L: float = 2 * np.pi

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 4, got {self.n}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"period L must be positive, got {self.L}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def dxi(self) -> float:
        return 2 * np.pi / self.L

    @property
    def half(self) -> int:
        """Number of non-negative xi_2 columns kept by the real transform."""
        return self.n // 2 + 1

    @cached_property
    def freqs(self) -> np.ndarray:
        """Signed integer frequencies in FFT order."""
        return np.fft.fftfreq(self.n, 1.0 / self.n)

    @cached_property
    def k1(self) -> np.ndarray:
        return np.broadcast_to(self.dxi * self.freqs[:, None], (self.n, self.n))

    @cached_property
    def k2(self) -> np.ndarray:
        return np.broadcast_to(self.dxi * self.freqs[None, :], (self.n, self.n))

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.hypot(self.k1, self.k2)

    @cached_property
    def cutoff(self) -> int:
        """Largest retained |integer frequency| under the 2/3 rule."""
        return self.n // 3

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        j = np.abs(self.freqs)
        return np.maximum(j[:, None], j[None, :]) <= self.n / 3

    @cached_property
    def neg_index(self) -> np.ndarray:
        """Row permutation taking j to -j (mod n)."""
        return (-np.arange(self.n)) % self.n

    @cached_property
    def half_multiplicity(self) -> np.ndarray:
        """How many full-lattice modes each half-spectrum column stands for."""
        m = np.full(self.half, 2.0)
        m[0] = 1.0
        m[-1] = 1.0
        return m

    def symbol(self, power: float) -> np.ndarray:
        """``|xi|**power`` on the full lattice; the origin gets 1 for power 0, else 0."""
        if power == 0:
            return np.ones((self.n, self.n))
        with np.errstate(divide="ignore"):
            out = self.kmag**power
        out[0, 0] = 0.0
        return out

    def physical_coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.n) * (self.L / self.n)
        return np.meshgrid(x, x, indexing="ij")


def make_grid(n: int, L: float = 2 * np.pi) -> Grid:
    return Grid(n, L)


# -- half/full spectrum plumbing ---------------------------------------------


def _to_half(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    return coeffs[..., : grid.half]


def _expand(half: np.ndarray, grid: Grid) -> np.ndarray:
    """Rebuild the full Hermitian lattice from its non-negative-xi_2 half."""
    n, h = grid.n, grid.half
    full = np.empty(half.shape[:-2] + (n, n), dtype=complex)
    full[..., :h] = half
    full[..., h:] = np.conj(half[..., grid.neg_index, h - 2 : 0 : -1])
    return full


def _to_physical_half(half: np.ndarray, grid: Grid) -> np.ndarray:
    scale = grid.dxi**2 * grid.n**2
    return scale * sfft.irfft2(half, s=(grid.n, grid.n), axes=(-2, -1))


def _from_physical_half(values: np.ndarray, grid: Grid) -> np.ndarray:
    scale = 1.0 / (grid.dxi**2 * grid.n**2)
    return scale * sfft.rfft2(values, axes=(-2, -1))


# -- field types ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real scalar field on ``grid``."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"coeffs shape {c.shape} does not match grid n={self.grid.n}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, grid: Grid) -> SpectralField:
        return cls(grid, np.zeros((grid.n, grid.n), dtype=complex))

    @classmethod
    def from_physical(cls, grid: Grid, values: np.ndarray) -> SpectralField:
        values = np.asarray(values, dtype=float)
        return cls(grid, _expand(_from_physical_half(values, grid), grid))

    @classmethod
    def from_modes(cls, grid: Grid, modes: dict) -> SpectralField:
        """Build from ``{(j, k): amplitude}`` in integer frequencies; mirrors are added."""
        c = np.zeros((grid.n, grid.n), dtype=complex)
        for (j, k), amp in modes.items():
            if max(abs(j), abs(k)) >= grid.n // 2:
                raise ValueError(f"mode {(j, k)} does not fit on an n={grid.n} lattice")
            c[j % grid.n, k % grid.n] = amp
            c[-j % grid.n, -k % grid.n] = np.conj(amp)
        return cls(grid, c)

    def physical(self) -> np.ndarray:
        return _to_physical_half(_to_half(self.coeffs, self.grid), self.grid)

    @property
    def mean_coeff(self) -> complex:
        return complex(self.coeffs[0, 0])

    def is_zero_mean(self, tol: float = _MEAN_TOL) -> bool:
        scale = max(float(np.abs(self.coeffs).max()), 1e-300)
        return abs(self.coeffs[0, 0]) <= tol * scale

    def hermitian_defect(self) -> float:
        """Max |c(-xi) - conj c(xi)| relative to max |c|."""
        c = self.coeffs
        mirror = np.conj(c[self.grid.neg_index][:, self.grid.neg_index])
        scale = max(float(np.abs(c).max()), 1e-300)
        return float(np.abs(c - mirror).max()) / scale

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.coeffs).all())

    def with_coeffs(self, coeffs: np.ndarray) -> SpectralField:
        return SpectralField(self.grid, coeffs)

    def _check(self, other: SpectralField):
        if self.grid != other.grid:
            raise ValueError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> SpectralField:
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar: float) -> SpectralField:
        if isinstance(scalar, SpectralField):
            raise TypeError("use dealiased_product for pointwise products of fields")
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VelocityField:
    u1: SpectralField
    u2: SpectralField

    @property
    def grid(self) -> Grid:
        return self.u1.grid

    def magnitude(self) -> np.ndarray:
        """Euclidean modulus of the coefficient pair at each mode."""
        return np.sqrt(np.abs(self.u1.coeffs) ** 2 + np.abs(self.u2.coeffs) ** 2)

    def divergence_defect(self) -> float:
        g = self.grid
        return float(np.abs(g.k1 * self.u1.coeffs + g.k2 * self.u2.coeffs).max())


# -- operators -----------------------------------------------------------------


def _require_zero_mean(f: SpectralField, what: str):
    if not f.is_zero_mean():
        raise ValueError(f"{what} requires a zero-mean field (mean coefficient {f.mean_coeff:.3e})")


def fractional_laplacian_apply(f: SpectralField, alpha2: float) -> SpectralField:
    """Multiply by ``|xi|**alpha2``; ``alpha2 = 2*alpha`` gives ``(-Laplacian)**alpha``."""
    if alpha2 < 0:
        _require_zero_mean(f, "a negative-order multiplier")
    return f.with_coeffs(f.grid.symbol(alpha2) * f.coeffs)


def _riesz_multipliers(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    kmag = grid.kmag.copy()
    kmag[0, 0] = 1.0
    m1 = 1j * grid.k2 / kmag
    m2 = -1j * grid.k1 / kmag
    m1[0, 0] = 0.0
    m2[0, 0] = 0.0
    return m1, m2


def riesz_velocity(theta: SpectralField) -> VelocityField:
    """u = (d2 Lambda^-1 theta, -d1 Lambda^-1 theta); the mean of theta is invisible to u."""
    m1, m2 = _riesz_multipliers(theta.grid)
    return VelocityField(theta.with_coeffs(m1 * theta.coeffs), theta.with_coeffs(m2 * theta.coeffs))


def embed(f: SpectralField, n: int) -> SpectralField:
    """Zero-pad ``f`` onto a finer lattice with the same period.

    The source Nyquist row and column must be empty: their modes have no
    unambiguous sign once the lattice grows.
    """
    g = f.grid
    if n < g.n:
        raise ValueError(f"cannot embed n={g.n} into smaller n={n}")
    h = g.n // 2
    if np.abs(f.coeffs[h, :]).max() > 0 or np.abs(f.coeffs[:, h]).max() > 0:
        raise ValueError("convolution support overflow: field has energy on the Nyquist row/column")
    big = Grid(n, g.L)
    out = np.zeros((n, n), dtype=complex)
    idx = np.concatenate([np.arange(h), np.arange(-h + 1, 0)])
    out[np.ix_(idx % n, idx % n)] = f.coeffs[np.ix_(idx % g.n, idx % g.n)]
    return SpectralField(big, out)


def dealiased_product(f: SpectralField, g: SpectralField, pad: bool = False) -> SpectralField:
    """Coefficients of the pointwise product ``f * g``.

    With ``pad=False`` the product is formed on the native grid and
    truncated with the 2/3 rule. With ``pad=True`` both factors are embedded
    in a lattice twice as large, so the result is the exact (untruncated)
    convolution and lives on that larger grid.
    """
    f._check(g)
    if pad:
        f = embed(f, 2 * f.grid.n)
        g = embed(g, 2 * g.grid.n)
    grid = f.grid
    prod = f.physical() * g.physical()
    half = _from_physical_half(prod, grid)
    if not pad:
        half = half * _to_half(grid.dealias_mask, grid)
    return SpectralField(grid, _expand(half, grid))


# -- nonlinear advection -------------------------------------------------------


class _NonlinearKernel:
    """Cached multipliers for div(u_theta theta) on one grid, half-spectrum layout."""

    def __init__(self, grid: Grid):
        self.grid = grid
        m1, m2 = _riesz_multipliers(grid)
        self.m1 = _to_half(m1, grid).copy()
        self.m2 = _to_half(m2, grid).copy()
        self.ik1 = 1j * _to_half(grid.k1, grid)
        self.ik2 = 1j * _to_half(grid.k2, grid)
        self.mask = _to_half(grid.dealias_mask, grid).astype(float)
        # the two physical-space scale factors and the forward one collapse into one
        scale = grid.dxi**2 * grid.n**2
        self.div1 = scale * self.mask * self.ik1
        self.div2 = scale * self.mask * self.ik2

    def divergence_form(self, half: np.ndarray) -> np.ndarray:
        n = self.grid.n
        shape = (n, n)
        theta = sfft.irfft2(half, s=shape, axes=(-2, -1))
        u1 = sfft.irfft2(self.m1 * half, s=shape, axes=(-2, -1))
        u2 = sfft.irfft2(self.m2 * half, s=shape, axes=(-2, -1))
        u1 *= theta
        u2 *= theta
        out = self.div1 * sfft.rfft2(u1, axes=(-2, -1))
        out += self.div2 * sfft.rfft2(u2, axes=(-2, -1))
        return out

    def advective_form(self, half: np.ndarray) -> np.ndarray:
        g = self.grid
        u1 = _to_physical_half(self.m1 * half, g)
        u2 = _to_physical_half(self.m2 * half, g)
        d1 = _to_physical_half(self.ik1 * half, g)
        d2 = _to_physical_half(self.ik2 * half, g)
        return self.mask * _from_physical_half(u1 * d1 + u2 * d2, g)


_KERNELS: dict[Grid, _NonlinearKernel] = {}


def _kernel(grid: Grid) -> _NonlinearKernel:
    k = _KERNELS.get(grid)
    if k is None:
        k = _KERNELS[grid] = _NonlinearKernel(grid)
    return k


def _nonlinear_coeffs(coeffs: np.ndarray, grid: Grid) -> np.ndarray:
    """div(u theta) for a stack of full-lattice coefficient arrays."""
    half = _kernel(grid).divergence_form(_to_half(coeffs, grid))
    return _expand(half, grid)


def nonlinear_term(theta: SpectralField) -> SpectralField:
    """Dealiased coefficients of div(u_theta theta), which equals u_theta . grad theta."""
    return theta.with_coeffs(_nonlinear_coeffs(theta.coeffs, theta.grid))


def advection_term(theta: SpectralField) -> SpectralField:
    """Same quantity as :func:`nonlinear_term`, computed as u . grad theta."""
    g = theta.grid
    half = _kernel(g).advective_form(_to_half(theta.coeffs, g))
    return theta.with_coeffs(_expand(half, g))
