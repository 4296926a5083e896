import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sqg_lab.mild import (
    RATIO_ALLOWANCE,
    FieldHistory,
    PicardError,
    TimeGrid,
    check_duhamel_l1_bound,
    check_duhamel_sup_bound,
    duhamel_history,
    duhamel_integral,
    heat_propagate,
    linear_l1x1_norm,
    picard_solve,
    psi_apply,
    select_epsilon_and_T,
    split_initial_data,
)
from sqg_lab.spectral import Grid, SpectralField
from sqg_lab.xnorms import random_field, xnorm

from conftest import coeff_at


def _scaled(field, s, alpha):
    return field * (s / xnorm(field, 1 - 2 * alpha))


def test_timegrid():
    tg = TimeGrid(0.0, 1.0, 4)
    assert tg.dt == 0.25
    np.testing.assert_allclose(tg.times, [0, 0.25, 0.5, 0.75, 1.0])
    assert tg.trapezoid_weights().sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1.0, 4)


def test_heat_examples():
    g = Grid(16)
    f = SpectralField.from_modes(g, {(2, 0): 1.0})
    assert coeff_at(heat_propagate(f, 0.5, 1.0), 2, 0) == pytest.approx(np.exp(-2.0), rel=1e-15)
    np.testing.assert_array_equal(heat_propagate(f, 0.0, 0.7).coeffs, f.coeffs)
    with pytest.raises(ValueError):
        heat_propagate(f, -1.0, 0.7)


def test_heat_semigroup(small_field):
    a = heat_propagate(heat_propagate(small_field, 0.3, 0.8), 0.45, 0.8)
    b = heat_propagate(small_field, 0.75, 0.8)
    assert np.abs(a.coeffs - b.coeffs).max() <= 1e-13 * np.abs(b.coeffs).max()


def test_linear_l1x1_closed_form():
    g = Grid(16)
    f = SpectralField.from_modes(g, {(1, 0): 1.0})
    assert linear_l1x1_norm(f, 0.0, 0.75) == 0.0
    assert linear_l1x1_norm(f, 60.0, 0.75) == pytest.approx(2.0, rel=1e-15)


def test_linear_l1x1_matches_quadrature(small_field):
    T, alpha = 0.7, 0.6
    t = np.linspace(0, T, 10_001)
    vals = [xnorm(heat_propagate(small_field, s, alpha), 1.0) for s in t]
    assert linear_l1x1_norm(small_field, T, alpha) == pytest.approx(np.trapezoid(vals, t), abs=1e-6)


def test_split_single_mode():
    g = Grid(16)
    f = SpectralField.from_modes(g, {(2, 1): 0.1})
    a0, b0, N = split_initial_data(f, 0.01, 0.75)
    assert not np.any(b0.coeffs)
    np.testing.assert_array_equal(a0.coeffs, f.coeffs)


def test_split_two_shells():
    g = Grid(32)
    alpha, r = 0.75, 0.04
    inner = SpectralField.from_modes(g, {(2, 0): 0.5, (0, 2): 0.3})
    outer = SpectralField.from_modes(g, {(6, 0): 0.001})
    a0, b0, N = split_initial_data(inner + outer, r, alpha)
    assert 2 <= N < 6
    assert xnorm(b0, 1 - 2 * alpha) == pytest.approx(xnorm(outer, 1 - 2 * alpha))
    np.testing.assert_array_equal((a0 + b0).coeffs, (inner + outer).coeffs)
    assert not np.any((a0.coeffs != 0) & (b0.coeffs != 0))


def test_split_tiny_field_is_all_tail():
    g = Grid(16)
    f = SpectralField.from_modes(g, {(1, 1): 1e-4})
    a0, b0, N = split_initial_data(f, 0.04, 0.75)
    assert N == 0 and not np.any(a0.coeffs)


def test_split_rejects_r():
    f = SpectralField.from_modes(Grid(8), {(1, 0): 0.1})
    with pytest.raises(ValueError, match="0<r<1/20"):
        split_initial_data(f, 0.06, 0.75)


def test_select_zero_field():
    z = SpectralField.zeros(Grid(8))
    cfg = select_epsilon_and_T(z, z, 0.04, 0.75)
    assert cfg.theta0_norm == 0 and all(cfg.conditions().values())


def test_select_T_single_mode_closed_form():
    g = Grid(16)
    A = 0.05
    f = SpectralField.from_modes(g, {(1, 0): A})
    cfg = select_epsilon_and_T(f, f, 0.04, 0.75)
    assert cfg.eps < 2 * A
    T_exact = -np.log(1 - cfg.eps / (2 * A))
    assert cfg.T == pytest.approx(T_exact, rel=1e-10)
    assert all(cfg.conditions().values())


def test_duhamel_zero_and_plane_wave():
    g = Grid(16)
    tg = TimeGrid(0.0, 1.0, 8)
    assert not np.any(duhamel_integral(FieldHistory.zeros(tg, g), 8, 0.75).coeffs)
    wave = SpectralField.from_modes(g, {(2, 1): 0.3})
    h = FieldHistory.from_fields(tg, [heat_propagate(wave, t, 0.75) for t in tg.times])
    assert np.abs(duhamel_integral(h, 8, 0.75).coeffs).max() < 1e-15


def _constant_forcing_error(steps, alpha=0.75, mode=(2, 1), t_end=1.0):
    g = Grid(16)
    tg = TimeGrid(0.0, t_end, steps)
    gf = SpectralField.from_modes(g, {mode: 1.0})
    forcing = FieldHistory.from_fields(tg, [gf] * (steps + 1))
    hist = FieldHistory.zeros(tg, g)
    mu = np.hypot(*mode) ** (2 * alpha)
    exact = -np.expm1(-t_end * mu) / mu
    got = coeff_at(duhamel_integral(hist, steps, alpha, forcing=forcing), *mode)
    return abs(got - exact)


def test_duhamel_constant_forcing_second_order():
    e = [_constant_forcing_error(s) for s in (16, 32, 64)]
    assert 3.5 <= e[0] / e[1] <= 4.5 and 3.5 <= e[1] / e[2] <= 4.5


def test_duhamel_history_matches_direct(small_field):
    tg = TimeGrid(0.0, 0.2, 10)
    h = FieldHistory.from_fields(tg, [heat_propagate(small_field, t, 0.7) for t in tg.times])
    rec = duhamel_history(h, 0.7)
    for i in (0, 3, 10):
        direct = duhamel_integral(h, i, 0.7).coeffs
        assert np.abs(rec.coeffs[i] - direct).max() <= 1e-13 * max(1.0, np.abs(direct).max())


def test_psi_examples(small_field):
    g = small_field.grid
    tg = TimeGrid(0.0, 0.1, 6)
    z = FieldHistory.zeros(tg, g)
    assert not np.any(psi_apply(z, z, SpectralField.zeros(g), 0.75).coeffs)
    wave = SpectralField.from_modes(g, {(1, 2): 0.2})
    a = FieldHistory.from_fields(tg, [heat_propagate(wave, t, 0.75) for t in tg.times])
    assert np.abs(psi_apply(z, a, SpectralField.zeros(g), 0.75).coeffs).max() < 1e-15
    b = FieldHistory.from_fields(tg, [small_field] * 7)
    out = psi_apply(b, a, small_field, 0.75)
    np.testing.assert_array_equal(out.coeffs[0], small_field.coeffs)


def test_picard_zero_and_single_mode():
    g = Grid(16)
    hist, rep = picard_solve(SpectralField.zeros(g), 0.04, 0.75, nodes=8)
    assert rep.converged and not np.any(hist.coeffs)
    f = SpectralField.from_modes(g, {(1, 1): 0.02})
    hist, rep = picard_solve(f, 0.04, 0.75, nodes=16)
    assert rep.converged and rep.iterations <= 2
    for t, c in zip(hist.times, hist.coeffs):
        np.testing.assert_allclose(c, heat_propagate(f, t, 0.75).coeffs, atol=1e-15)


@pytest.mark.parametrize("alpha", [0.6, 0.75, 1.0])
@pytest.mark.parametrize("s", [0.05, 0.2, 1.0])
def test_picard_random(alpha, s):
    g = Grid(32)
    th = _scaled(random_field(g, np.random.default_rng(7), kmin=1, kmax=8), s, alpha)
    hist, rep = picard_solve(th, 0.04, alpha, nodes=32)
    assert rep.converged
    assert all(rep.split.conditions().values())
    assert rep.final_sup_norm <= 0.04 and rep.final_l1_norm <= 0.04
    assert rep.max_ratio <= 0.5 + RATIO_ALLOWANCE
    # discrete mild-solution identity
    lin = np.stack([heat_propagate(th, t, alpha).coeffs for t in hist.times])
    resid = hist.coeffs - (lin - duhamel_history(hist, alpha).coeffs)
    assert np.abs(resid).max() <= 1e-8 * np.abs(hist.coeffs).max()


def test_picard_reports_nonconvergence():
    g = Grid(16)
    th = _scaled(random_field(g, np.random.default_rng(1), kmin=1, kmax=4), 0.2, 0.75)
    with pytest.raises(PicardError) as exc:
        picard_solve(th, 0.04, 0.75, nodes=8, max_iter=1, tol=1e-30)
    assert exc.value.report.iterations == 1


def test_duhamel_bounds_zero_and_plane_wave():
    g = Grid(16)
    tg = TimeGrid(0.0, 0.5, 8)
    z = FieldHistory.zeros(tg, g)
    assert check_duhamel_sup_bound(z, 0.75).passed and check_duhamel_l1_bound(z, 0.75).lhs == 0
    wave = SpectralField.from_modes(g, {(3, 1): 0.4})
    h = FieldHistory.from_fields(tg, [heat_propagate(wave, t, 0.75) for t in tg.times])
    v = check_duhamel_sup_bound(h, 0.75)
    assert v.lhs < 1e-15 < v.rhs


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), alpha=st.sampled_from([0.6, 0.75, 1.0]), T=st.floats(1e-3, 0.2))
def test_duhamel_bounds_on_heat_histories(seed, alpha, T):
    # moderate mu*dt keeps the trapezoid's overshoot of the exponential kernel inside the slack
    g = Grid(16)
    rng = np.random.default_rng(seed)
    f = random_field(g, rng, kmin=1, kmax=4)
    tg = TimeGrid(0.0, T, 32)
    h = FieldHistory.from_fields(tg, [heat_propagate(f, t, alpha) for t in tg.times])
    assert check_duhamel_sup_bound(h, alpha).passed
    assert check_duhamel_l1_bound(h, alpha).passed
