import json

import numpy as np
import pytest

from sqg_lab.diagnostics import (
    CERTIFIED,
    INCONCLUSIVE,
    VIOLATED,
    blowup_monitor,
    certify_small_data,
    perturbation_decay,
    rescale,
    scaling_check,
    self_convergence,
    small_data_certificate,
    trapezoid_error_estimate,
)
from sqg_lab.mild import heat_propagate
from sqg_lab.spectral import Grid, SpectralField
from sqg_lab.timestepper import NormTrace, SimConfig, simulate
from sqg_lab.xnorms import random_field, xnorm

from conftest import coeff_at


def _trace(t, low, high, cum):
    tr = NormTrace()
    for row in zip(t, low, high, cum):
        tr.append(*row)
    return tr


def _scaled_random(grid, s, alpha, seed=0, kmax=6):
    f = random_field(grid, np.random.default_rng(seed), kmin=1, kmax=kmax)
    return f * (s / xnorm(f, 1 - 2 * alpha))


def test_small_data_analytic_single_mode():
    # |xi0| = 1, alpha = 1: n_low = 0.2 e^-t, cum = 0.2 (1 - e^-t)
    t = np.linspace(0, 10, 201)
    tr = _trace(t, 0.2 * np.exp(-t), 0.2 * np.exp(-t), 0.2 * -np.expm1(-t))
    cert = small_data_certificate(tr, 0.2, alpha=1.0, tol=0.0)
    assert cert.status == CERTIFIED
    # lhs = 0.2 e^-t + 0.2 * 0.2 (1 - e^-t) is strictly below 0.2 after t = 0
    assert cert.params["min_slack"] == pytest.approx(0.0, abs=1e-16)


def test_small_data_simulated_single_mode():
    g = Grid(16)
    f = SpectralField.from_modes(g, {(1, 0): 0.05})  # X^{-1} norm 0.1
    cert, tr = certify_small_data(f, SimConfig(1.0, 5.0, g, dt=0.05))
    assert cert.status == CERTIFIED
    assert cert.params["self_convergence"]["passed"]


def test_small_data_zero_field():
    tr = _trace([0.0, 1.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0])
    assert small_data_certificate(tr, 0.0).status == CERTIFIED


def test_small_data_hypothesis_not_met():
    tr = _trace([0.0], [0.3], [0.3], [0.0])
    cert = small_data_certificate(tr, 0.3)
    assert cert.status == INCONCLUSIVE and cert.reason == "hypothesis not met"
    assert small_data_certificate(tr, 0.25).status == INCONCLUSIVE


def test_small_data_detects_violation_and_divergence():
    tr = _trace([0.0, 1.0], [0.2, 0.21], [1.0, 1.0], [0.0, 1.0])
    assert small_data_certificate(tr, 0.2).status == VIOLATED
    tr.diverged, tr.diverged_at = True, 1.0
    assert small_data_certificate(tr, 0.2).status == VIOLATED


def test_small_data_default_tolerance():
    tr = _trace([0.0, 1.0], [0.2, 0.2001], [0.0, 0.0], [0.0, 0.0])
    cert = small_data_certificate(tr, 0.2)
    assert cert.params["tol"] == pytest.approx(2e-4) and cert.status == CERTIFIED
    assert small_data_certificate(tr, 0.2, quad_err=1e-3).params["tol"] == 1e-3


def test_trapezoid_error_estimate():
    t = np.linspace(0, 2, 41)
    y = np.exp(-3 * t)
    tr = _trace(t, y, y, np.zeros_like(t))
    actual = np.trapezoid(y, t) - (1 - np.exp(-6)) / 3
    assert trapezoid_error_estimate(tr) == pytest.approx(abs(actual), rel=0.02)


def test_blowup_monitor_cases():
    assert blowup_monitor(_trace([0, 1], [0, 0], [0, 0], [0, 0])).status == CERTIFIED
    assert blowup_monitor(_trace([0, 1], [0.2, 0.1], [1, 0.5], [0, 0.7]), t_star=5.0).status == CERTIFIED
    # norms blow up while the integral stays small: contradicts the criterion
    assert blowup_monitor(_trace([0, 1], [0.2, 1e9], [1, 2], [0, 1.5])).status == VIOLATED
    # norms blow up together with the integral: consistent
    assert blowup_monitor(_trace([0, 1], [0.2, 1e9], [1, 1e9], [0, 1e8])).status == CERTIFIED
    tr = _trace([0, 1], [0.2, np.inf], [1, np.inf], [0, 1.0])
    tr.diverged, tr.diverged_at = True, 1.0
    assert blowup_monitor(tr).status == VIOLATED
    assert blowup_monitor(tr, t_star=1.0).status == CERTIFIED  # divergence lies outside [0, t_star)


def test_blowup_monitor_small_data_run(small_field):
    f = small_field * (0.1 / xnorm(small_field, -0.5))
    _, tr = simulate(f, SimConfig(0.75, 2.0, f.grid, dt=0.05), keep_history=False)
    cert = blowup_monitor(tr, alpha=0.75)
    assert cert.status == CERTIFIED and cert.params["max_n_low"] <= 0.1 + 1e-15
    json.dumps(cert.to_dict())


def test_rescale_maps_modes():
    g = Grid(32)
    f = SpectralField.from_modes(g, {(2, 1): 0.3 + 0.1j})
    out = rescale(f, 3, 0.75)
    assert coeff_at(out, 6, 3) == pytest.approx((0.3 + 0.1j) * 3**0.5)
    assert coeff_at(out, -6, -3) == pytest.approx((0.3 - 0.1j) * 3**0.5)
    np.testing.assert_allclose(out.physical(), 3**0.5 * f.physical()[(3 * np.arange(32)) % 32][:, (3 * np.arange(32)) % 32], atol=1e-14)


def test_rescale_errors():
    g = Grid(16)
    f = SpectralField.from_modes(g, {(3, 0): 1.0})
    with pytest.raises(ValueError, match="overflow"):
        rescale(f, 2, 0.75)
    with pytest.raises(ValueError):
        rescale(f, 1.5, 0.75)
    assert rescale(f, 2, 0.75, n=32).grid.n == 32


def test_scaling_identity_and_single_mode():
    g = Grid(32)
    f = SpectralField.from_modes(g, {(2, 0): 0.4})
    for lam in (1, 2):
        cert = scaling_check(f, lam, 0.75)
        assert cert.status == CERTIFIED
        assert cert.evidence[0]["rel_err"] <= 1e-15
    cert = scaling_check(f, 1, 0.75)
    assert cert.evidence[0]["rescaled"] == cert.evidence[0]["original"]


def test_scaling_random(rng):
    g = Grid(64)
    f = random_field(g, rng, kmin=1, kmax=5)
    for lam in (2, 4):
        for alpha in (0.6, 0.75, 1.0):
            cert = scaling_check(f, lam, alpha, t=0.3)
            assert cert.status == CERTIFIED, cert.evidence


def test_self_convergence_passes_on_resolved_run():
    g = Grid(32)
    f = _scaled_random(g, 0.2, 0.75)
    cfg = SimConfig(0.75, 1.0, g, dt=0.05)
    _, tr = simulate(f, cfg, keep_history=False)
    conv = self_convergence(f, cfg, tr)
    assert conv.passed and conv.rel_change_n_low < 1e-3
    assert len(conv.refined) == len(tr)


def test_self_convergence_fails_on_coarse_run():
    g = Grid(32)
    f = _scaled_random(g, 0.2, 1.0, kmax=10)
    cfg = SimConfig(1.0, 1.0, g, dt=0.5)
    _, tr = simulate(f, cfg, keep_history=False)
    assert not self_convergence(f, cfg, tr).passed


def test_perturbation_zero_is_bitwise():
    g = Grid(32)
    f = _scaled_random(g, 0.2, 0.75)
    cert, _ = perturbation_decay(f, SpectralField.zeros(g), SimConfig(0.75, 1.0, g, dt=0.05))
    assert cert.status == CERTIFIED and cert.params["bitwise_zero"]
    assert all(row["delta"] == 0.0 for row in cert.evidence)


def test_perturbation_single_modes():
    g = Grid(32)
    f = SpectralField.from_modes(g, {(1, 0): 0.05})
    d = SpectralField.from_modes(g, {(0, 2): 5e-5})
    cert, _ = perturbation_decay(f, d, SimConfig(0.75, 0.5, g, dt=0.05))
    assert cert.status == CERTIFIED
    # early on the difference follows the linear flow of delta0; coupling to theta0 is O(||theta0||) relative
    row = cert.evidence[1]
    assert row["delta"] == pytest.approx(xnorm(heat_propagate(d, row["t"], 0.75), -0.5), rel=2e-2)


@pytest.mark.parametrize("alpha", [0.6, 0.75, 1.0])
def test_perturbation_random_pair(alpha):
    g = Grid(32)
    f = _scaled_random(g, 0.2, alpha, seed=1)
    d = _scaled_random(g, 2e-4, alpha, seed=2)
    cert, tr = perturbation_decay(f, d, SimConfig(alpha, 2.0, g, dt=0.05))
    assert cert.status == CERTIFIED, cert.to_dict()
    assert cert.params["C"] == 8.0
