"""Initial data generators. Wavevectors are integer lattice indices (j, k), i.e. xi = dxi * (j, k)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import Grid, SpectralField, require_alpha
from .xnorms import random_field, xnorm

__all__ = ["InitSpec", "INIT_KINDS", "generate_initial"]

INIT_KINDS = ("single_mode", "random_band", "gaussian_vortex_pair", "shear")


@dataclass(frozen=True)
class InitSpec:
    kind: str = "single_mode"
    amplitude: float = 1.0
    wavevector: tuple[int, int] = (1, 0)
    kmin: float = 1.0
    kmax: float = 8.0
    decades: float = 2.0
    seed: int | None = None
    width: float | None = None  # vortex radius / shear-layer thickness, in physical length
    separation: float | None = None
    perturbation: float = 0.0
    target_norm: float | None = None

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ValueError(f"init.kind must be one of {', '.join(INIT_KINDS)}, got {self.kind!r}")
        wv = tuple(self.wavevector)
        if len(wv) != 2 or any(int(v) != v for v in wv):
            raise ValueError(f"init.wavevector must be two integers, got {self.wavevector!r}")
        object.__setattr__(self, "wavevector", (int(wv[0]), int(wv[1])))
        if self.kind == "single_mode" and wv == (0, 0):
            raise ValueError("init.wavevector must be nonzero (fields are zero-mean)")
        if not 0 <= self.kmin <= self.kmax:
            raise ValueError(f"init band must satisfy 0 <= kmin <= kmax, got [{self.kmin}, {self.kmax}]")
        if self.decades < 0:
            raise ValueError(f"init.decades must be >= 0, got {self.decades}")
        for name in ("width", "separation"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"init.{name} must be positive, got {v}")
        if self.target_norm is not None and not self.target_norm >= 0:
            raise ValueError(f"init.target_norm must be >= 0, got {self.target_norm}")

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["wavevector"] = list(self.wavevector)
        return out


def _project(values: np.ndarray, grid: Grid) -> SpectralField:
    """Physical samples -> zero-mean field truncated at the dealiasing cutoff."""
    f = SpectralField.from_physical(grid, values)
    c = np.where(grid.dealias_mask, f.coeffs, 0.0)
    c[0, 0] = 0.0
    return f.with_coeffs(c)


def _periodic_gaussian(grid: Grid, center, width: float) -> np.ndarray:
    x1, x2 = grid.physical_coords()
    L = grid.L
    d1 = (x1 - center[0] + L / 2) % L - L / 2
    d2 = (x2 - center[1] + L / 2) % L - L / 2
    return np.exp(-(d1**2 + d2**2) / (2 * width**2))


def _single_mode(spec: InitSpec, grid: Grid) -> SpectralField:
    j, k = spec.wavevector
    if max(abs(j), abs(k)) > grid.cutoff:
        raise ValueError(f"wavevector {spec.wavevector} is beyond the dealiasing cutoff {grid.cutoff} of n={grid.n}")
    # amplitude is the physical peak: A cos(xi.x) has coefficients A/2 at +-xi
    return SpectralField.from_modes(grid, {(j, k): spec.amplitude / (2 * grid.dxi**2)})


def _random_band(spec: InitSpec, grid: Grid, seed: int) -> SpectralField:
    rng = np.random.default_rng(seed)
    f = random_field(grid, rng, kmin=spec.kmin * grid.dxi, kmax=spec.kmax * grid.dxi, decades=spec.decades)
    peak = np.abs(f.physical()).max()
    return f * (spec.amplitude / peak)


def _vortex_pair(spec: InitSpec, grid: Grid) -> SpectralField:
    L = grid.L
    width = spec.width or L / 16
    sep = spec.separation or L / 4
    c = L / 2
    vals = _periodic_gaussian(grid, (c - sep / 2, c), width) - _periodic_gaussian(grid, (c + sep / 2, c), width)
    return _project(spec.amplitude * vals, grid)


def _shear(spec: InitSpec, grid: Grid) -> SpectralField:
    """Double shear layer in x2 with an optional x1-periodic kink of relative size ``perturbation``."""
    x1, x2 = grid.physical_coords()
    L = grid.L
    delta = spec.width or L / 32
    kick = spec.perturbation * np.sin(2 * np.pi * x1 / L)
    y = x2 + kick
    vals = np.tanh((y - L / 4) / delta) - np.tanh((y - 3 * L / 4) / delta) - 1
    return _project(spec.amplitude * vals, grid)


def generate_initial(spec: InitSpec, grid: Grid, alpha: float, seed: int = 0) -> SpectralField:
    """Build the initial field; ``spec.seed`` takes precedence over ``seed``.

    ``alpha`` is needed only to rescale to ``spec.target_norm`` in X^{1-2a}.
    """
    alpha = require_alpha(alpha)
    if spec.kind == "single_mode":
        f = _single_mode(spec, grid)
    elif spec.kind == "random_band":
        f = _random_band(spec, grid, spec.seed if spec.seed is not None else seed)
    elif spec.kind == "gaussian_vortex_pair":
        f = _vortex_pair(spec, grid)
    else:
        f = _shear(spec, grid)
    if spec.target_norm is not None:
        current = xnorm(f, 1 - 2 * alpha)
        if current == 0:
            if spec.target_norm != 0:
                raise ValueError("cannot rescale a zero field to a nonzero target_norm")
            return f
        f = f * (spec.target_norm / current)
    return f
