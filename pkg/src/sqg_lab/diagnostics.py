"""
Experiments built on norm traces: small-data decay
certificates, the integral blow-up criterion, scaling criticality and
perturbation growth between two nearby runs.

Every experiment returns a :class:`Certificate`.  ``violated`` is reserved
for an inequality failing beyond its tolerance on a run that passed the
resolution gate; under-resolved runs are ``inconclusive``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .mild import heat_propagate
from .spectral import Grid, SpectralField, _to_half, embed, require_alpha
from .timestepper import NormTrace, SimConfig, _ETD2, simulate
from .xnorms import xnorm

__all__ = [
    "Certificate",
    "CERTIFIED",
    "VIOLATED",
    "INCONCLUSIVE",
    "small_data_certificate",
    "blowup_monitor",
    "rescale",
    "scaling_check",
    "ConvergenceCheck",
    "self_convergence",
    "trapezoid_error_estimate",
    "certify_small_data",
    "perturbation_decay",
]

CERTIFIED, VIOLATED, INCONCLUSIVE = "certified", "violated", "inconclusive"
SMALL_DATA_THRESHOLD = 0.25
CONVERGENCE_TOL = 0.10
PERTURBATION_C = 8.0  # engineering constant for the Gronwall envelope, not a sharp value
_MAX_EVIDENCE = 64


@dataclass
class Certificate:
    kind: str
    status: str
    alpha: float | None = None
    params: dict = field(default_factory=dict)
    evidence: list = field(default_factory=list)
    reason: str = ""

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "status": self.status,
            "alpha": self.alpha,
            "params": self.params,
            "evidence": self.evidence,
        }
        if self.reason:
            out["reason"] = self.reason
        return out


def _thin(rows: list, worst: int | None = None) -> list:
    """Evenly subsample long evidence lists, always keeping the endpoints and ``worst``."""
    if len(rows) <= _MAX_EVIDENCE:
        return rows
    keep = set(np.linspace(0, len(rows) - 1, _MAX_EVIDENCE).round().astype(int).tolist())
    if worst is not None:
        keep.add(worst)
    return [rows[i] for i in sorted(keep)]


def trapezoid_error_estimate(trace: NormTrace) -> float:
    """Richardson estimate of the trapezoid error in the final ``cum`` value.

    Compares the sampled trapezoid sum with the one using every other
    sample; only meaningful when samples are every step.
    """
    t = np.asarray(trace.t)
    y = np.asarray(trace.n_high)
    if len(t) < 3:
        return 0.0
    fine = np.trapezoid(y, t)
    m = (len(t) - 1) // 2 * 2 + 1
    coarse = np.trapezoid(y[:m:2], t[:m:2]) + np.trapezoid(y[m - 1 :], t[m - 1 :])
    return float(abs(fine - coarse) / 3)


def small_data_certificate(
    trace: NormTrace,
    theta0_norm: float,
    alpha: float | None = None,
    tol: float | None = None,
    quad_err: float = 0.0,
) -> Certificate:
    """Check ``n_low(t) + (1 - 4 s) cum(t) <= s`` on every trace row, ``s = ||theta0||``.

    ``tol`` defaults to ``max(1e-3 s, quad_err)``.
    """
    s = float(theta0_norm)
    if tol is None:
        tol = max(1e-3 * s, quad_err)
    params = {"theta0_norm": s, "tol": tol}
    if not s < SMALL_DATA_THRESHOLD:
        return Certificate("small_data_decay", INCONCLUSIVE, alpha, params, reason="hypothesis not met")
    if trace.diverged:
        return Certificate(
            "small_data_decay", VIOLATED, alpha, params,
            [{"t": trace.diverged_at, "diverged": True}], reason="trace diverged",
        )
    low, cum = np.asarray(trace.n_low), np.asarray(trace.cum)
    lhs = low + (1 - 4 * s) * cum
    slack = s + tol - lhs
    rows = [
        {"t": t, "n_low": a, "cum": c, "lhs": l, "rhs": s, "slack": float(sl)}
        for t, a, c, l, sl in zip(trace.t, low.tolist(), cum.tolist(), lhs.tolist(), slack)
    ]
    worst = int(np.argmin(slack)) if len(slack) else None
    status = CERTIFIED if np.all(slack >= 0) else VIOLATED
    if worst is not None:
        params["min_slack"] = float(slack[worst])
    return Certificate("small_data_decay", status, alpha, params, _thin(rows, worst))


def blowup_monitor(
    trace: NormTrace,
    t_star: float | None = None,
    cum_bound: float = 1e6,
    norm_cap: float = 1e6,
    alpha: float | None = None,
) -> Certificate:
    """Consistency with the integral blow-up criterion on ``[0, t_star)``.

    A solution whose ``int ||theta||_{X^1}`` stays below ``cum_bound`` must
    keep bounded norms.  The run is ``violated`` only when ``n_low`` leaves
    ``norm_cap`` (or the trace diverged) while the integral stayed bounded.
    """
    t = np.asarray(trace.t)
    keep = np.ones(len(t), bool) if t_star is None else t < t_star
    low = np.asarray(trace.n_low)[keep]
    cum = np.asarray(trace.cum)[keep]
    finite = np.isfinite(low) & np.isfinite(cum)
    low_f, cum_f = low[finite], cum[finite]
    max_low = float(low_f.max()) if len(low_f) else 0.0
    max_cum = float(cum_f.max()) if len(cum_f) else 0.0
    diverged = bool(trace.diverged and (t_star is None or trace.diverged_at < t_star))
    norm_blowup = diverged or not np.all(finite) or max_low > norm_cap
    cum_bounded = max_cum < cum_bound
    params = {
        "t_star": t_star,
        "cum_bound": cum_bound,
        "norm_cap": norm_cap,
        "max_n_low": max_low,
        "max_cum": max_cum,
        "diverged": diverged,
    }
    if norm_blowup and cum_bounded:
        return Certificate(
            "blowup_monitor", VIOLATED, alpha, params,
            reason="norms left the cap while the X^1 time integral stayed bounded",
        )
    evidence = [{"t": float(a), "n_low": float(b), "cum": float(c)} for a, b, c in zip(t[keep], low, cum)]
    return Certificate("blowup_monitor", CERTIFIED, alpha, params, _thin(evidence))


def rescale(theta: SpectralField, lam: int, alpha: float, n: int | None = None) -> SpectralField:
    """``lam**(2a-1) * theta(lam x)`` on the same period.

    Mode ``xi`` moves to ``lam * xi`` with its coefficient multiplied by
    ``lam**(2a-1)``.  The result lives on an ``n``-point lattice (default:
    the source one) and must stay below its dealiasing cutoff.
    """
    alpha = require_alpha(alpha)
    if int(lam) != lam or lam < 1:
        raise ValueError(f"lam must be a positive integer, got {lam}")
    lam = int(lam)
    g = theta.grid
    big = Grid(g.n if n is None else n, g.L)
    j = np.rint(g.freqs).astype(int)
    J1, J2 = np.meshgrid(j, j, indexing="ij")
    nz = theta.coeffs != 0
    if np.any(nz & (np.maximum(np.abs(J1), np.abs(J2)) * lam > big.cutoff)):
        raise ValueError(f"grid overflow: lam={lam} pushes modes past the cutoff {big.cutoff} of n={big.n}")
    out = np.zeros((big.n, big.n), dtype=complex)
    out[(lam * J1[nz]) % big.n, (lam * J2[nz]) % big.n] = lam ** (2 * alpha - 1) * theta.coeffs[nz]
    return SpectralField(big, out)


def scaling_check(
    theta: SpectralField,
    lam: int,
    alpha: float,
    t: float = 1.0,
    n: int | None = None,
    norm_rtol: float = 1e-12,
    flow_rtol: float = 1e-13,
) -> Certificate:
    """Critical-norm invariance under rescaling and commutation with the linear flow."""
    alpha = require_alpha(alpha)
    scaled = rescale(theta, lam, alpha, n)
    sigma = 1 - 2 * alpha
    n0, n1 = xnorm(theta, sigma), xnorm(scaled, sigma)
    norm_err = abs(n1 - n0) / max(n0, np.finfo(float).tiny)

    lhs = heat_propagate(scaled, t, alpha).coeffs
    rhs = rescale(heat_propagate(theta, lam ** (2 * alpha) * t, alpha), lam, alpha, n).coeffs
    scale = max(np.abs(lhs).max(), np.finfo(float).tiny)
    flow_err = float(np.abs(lhs - rhs).max() / scale)

    ok = norm_err <= norm_rtol and flow_err <= flow_rtol
    params = {"lam": lam, "t": t, "norm_rtol": norm_rtol, "flow_rtol": flow_rtol}
    evidence = [
        {"check": "norm", "original": n0, "rescaled": n1, "rel_err": norm_err},
        {"check": "linear_flow", "rel_err": flow_err},
    ]
    return Certificate("scaling", CERTIFIED if ok else VIOLATED, alpha, params, evidence)


@dataclass
class ConvergenceCheck:
    passed: bool
    rel_change_n_low: float
    rel_change_cum: float
    refined: NormTrace

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "rel_change_n_low": self.rel_change_n_low,
            "rel_change_cum": self.rel_change_cum,
        }


def _rel_change(coarse, fine) -> float:
    coarse, fine = np.asarray(coarse), np.asarray(fine)
    scale = np.abs(coarse).max() if len(coarse) else 0.0
    if scale == 0:
        return float(np.abs(fine).max()) if len(fine) else 0.0
    return float(np.abs(fine - coarse).max() / scale)


def self_convergence(theta0: SpectralField, cfg: SimConfig, trace: NormTrace, tol: float = CONVERGENCE_TOL) -> ConvergenceCheck:
    """Rerun at half the step on a doubled lattice and compare the sampled norms.

    Samples are aligned by doubling ``record_every``.
    """
    fine_grid = Grid(2 * cfg.grid.n, cfg.grid.L)
    fine_cfg = replace(cfg, grid=fine_grid, dt=cfg.step_dt / 2, record_every=2 * cfg.record_every)
    _, fine = simulate(embed(theta0, fine_grid.n), fine_cfg, keep_history=False)
    if fine.diverged or trace.diverged or len(fine) != len(trace):
        return ConvergenceCheck(False, math.inf, math.inf, fine)
    d_low = _rel_change(trace.n_low, fine.n_low)
    d_cum = _rel_change(trace.cum, fine.cum)
    return ConvergenceCheck(d_low < tol and d_cum < tol, d_low, d_cum, fine)


def certify_small_data(
    theta0: SpectralField,
    cfg: SimConfig,
    tol: float | None = None,
    check_convergence: bool = True,
) -> tuple[Certificate, NormTrace]:
    """Simulate, check the small-data decay inequality and apply the resolution gate."""
    s = xnorm(theta0, 1 - 2 * cfg.alpha)
    _, trace = simulate(theta0, cfg, keep_history=False)
    quad = trapezoid_error_estimate(trace) if cfg.record_every == 1 else 0.0
    cert = small_data_certificate(trace, s, cfg.alpha, tol=tol, quad_err=quad)
    cert.params.update(dt=cfg.step_dt, n=cfg.grid.n, t_end=cfg.t_end, quad_err=quad)
    if check_convergence and cert.status != INCONCLUSIVE and not trace.diverged:
        conv = self_convergence(theta0, cfg, trace)
        cert.params["self_convergence"] = conv.to_dict()
        if not conv.passed:
            cert.status, cert.reason = INCONCLUSIVE, "self-convergence test failed"
    return cert, trace


def perturbation_decay(
    theta0: SpectralField,
    delta0: SpectralField,
    cfg: SimConfig,
    C: float = PERTURBATION_C,
    check_convergence: bool = True,
    rtol: float = 1e-6,
) -> tuple[Certificate, NormTrace]:
    """March ``theta0`` and ``theta0 + delta0`` in lockstep and bound their difference.

    Envelope: ``||delta(t)|| <= ||delta0|| exp(C int_0^t ||th1||^{1/(2a-1)} ||th1||_{X^1})``
    with norms ``X^{1-2a}`` unless marked.  With ``delta0 = 0`` the two runs
    must be bitwise identical.  Returns the certificate and the reference
    run's trace.
    """
    alpha = require_alpha(cfg.alpha)
    g = cfg.grid
    if theta0.grid != g or delta0.grid != g:
        raise ValueError("theta0, delta0 and cfg must share a grid")
    sigma = 1 - 2 * alpha
    power = 1 / (2 * alpha - 1)
    stepper = _ETD2(g, alpha, cfg.step_dt, nonlinear=cfg.nonlinear)
    dt = cfg.step_dt

    th1 = _to_half(theta0.coeffs, g).copy()
    th2 = _to_half((theta0 + delta0).coeffs, g).copy()
    d0 = xnorm(delta0, sigma)
    zero_pert = not np.any(delta0.coeffs)

    trace = NormTrace()
    low, high = stepper.norms(th1)
    integrand = low**power * high
    cum = G = 0.0
    trace.append(0.0, low, high, cum)
    rows = [{"t": 0.0, "delta": d0, "envelope": d0}]
    bitwise = True
    ok = True
    for i in range(1, cfg.steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            th1 = stepper.step(th1)
            th2 = stepper.step(th2)
            new_low, new_high = stepper.norms(th1)
        if not (np.isfinite(new_low) and np.isfinite(new_high)) or not np.all(np.isfinite(th2)):
            trace.diverged, trace.diverged_at = True, i * dt
            break
        new_integrand = new_low**power * new_high
        cum += 0.5 * dt * (high + new_high)
        G += 0.5 * dt * (integrand + new_integrand)
        low, high, integrand = new_low, new_high, new_integrand
        diff = th2 - th1
        if zero_pert:
            bitwise &= not np.any(diff)
        if i % cfg.record_every == 0 or i == cfg.steps:
            t = i * dt
            trace.append(t, low, high, cum)
            d = float(np.sum(stepper.w_low * np.abs(diff)))
            env = d0 * math.exp(C * G)
            ok &= d <= env * (1 + rtol) + 1e-300
            rows.append({"t": t, "delta": d, "envelope": env})

    params = {
        "C": C,
        "C_note": "engineering constant, not a sharp bound",
        "delta0_norm": d0,
        "theta0_norm": xnorm(theta0, sigma),
        "dt": dt,
        "n": g.n,
        "t_end": cfg.t_end,
    }
    if trace.diverged:
        return Certificate("perturbation", INCONCLUSIVE, alpha, params, _thin(rows), "reference run diverged"), trace
    if zero_pert:
        params["bitwise_zero"] = bitwise
        ok = bitwise
    status = CERTIFIED if ok else VIOLATED
    cert = Certificate("perturbation", status, alpha, params, _thin(rows))
    if check_convergence:
        conv = self_convergence(theta0, cfg, trace)
        params["self_convergence"] = conv.to_dict()
        if not conv.passed:
            cert.status, cert.reason = INCONCLUSIVE, "self-convergence test failed"
    return cert, trace
