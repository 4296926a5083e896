import numpy as np
import pytest

from sqg_lab.spectral import Grid, SpectralField
from sqg_lab.xnorms import random_field


def brute_convolution(f: SpectralField, g: SpectralField) -> dict:
    """Coefficients of f*g on the infinite lattice by direct O(n^4) summation.

    Returns {(j, k): coefficient} in integer frequencies; includes the dxi**2
    weight so that it compares directly with product coefficients.
    """
    grid = f.grid
    j = np.rint(grid.freqs).astype(int)
    nzf = [(a, b) for a in range(grid.n) for b in range(grid.n) if f.coeffs[a, b] != 0]
    nzg = [(a, b) for a in range(grid.n) for b in range(grid.n) if g.coeffs[a, b] != 0]
    out = {}
    for a, b in nzf:
        for c, d in nzg:
            key = (j[a] + j[c], j[b] + j[d])
            out[key] = out.get(key, 0) + f.coeffs[a, b] * g.coeffs[c, d]
    return {k: v * grid.dxi**2 for k, v in out.items()}


def coeff_at(f: SpectralField, j: int, k: int) -> complex:
    n = f.grid.n
    return complex(f.coeffs[j % n, k % n])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid16():
    return Grid(16)


@pytest.fixture
def small_field(grid16, rng):
    return random_field(grid16, rng, kmin=1, kmax=4)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion; printed in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    def record(number: int, ok: bool, detail: str):
        lines.append(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(lines[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
