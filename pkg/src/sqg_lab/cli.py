"""``sqg-lab`` command line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
import scipy.fft

from .config import COMMANDS, ConfigError, RunConfig, dump_config, parse_config
from .diagnostics import (
    CERTIFIED,
    INCONCLUSIVE,
    VIOLATED,
    blowup_monitor,
    certify_small_data,
    perturbation_decay,
    scaling_check,
)
from .initial import generate_initial
from .mild import PicardError, picard_solve
from .spectral import Grid, SpectralField
from .timestepper import NormTrace, SimConfig, simulate
from .xnorms import fuzz_inequalities, random_field, xnorm

__all__ = ["run", "main", "EXIT_CODES"]

EXIT_OK, EXIT_USAGE, EXIT_VIOLATED, EXIT_INCONCLUSIVE = 0, 1, 2, 3
EXIT_CODES = {CERTIFIED: EXIT_OK, "success": EXIT_OK, VIOLATED: EXIT_VIOLATED, INCONCLUSIVE: EXIT_INCONCLUSIVE}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _sim_config(cfg: RunConfig, grid: Grid) -> SimConfig:
    return SimConfig(cfg.alpha, cfg.t_end, grid, dt=cfg.dt, record_every=cfg.record_every)


def _history_trace(history, alpha: float) -> NormTrace:
    low = history.norms(1 - 2 * alpha)
    high = history.norms(1.0)
    t = history.times
    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (high[1:] + high[:-1]))])
    tr = NormTrace()
    for row in zip(t, low, high, cum):
        tr.append(*row)
    return tr


def _cmd_simulate(cfg, grid, theta0):
    sim = _sim_config(cfg, grid)
    _, trace = simulate(theta0, sim, keep_history=False)
    cert = blowup_monitor(trace, alpha=cfg.alpha)
    report = {
        "status": cert.status,
        "theta0_norm": xnorm(theta0, 1 - 2 * cfg.alpha),
        "steps": sim.steps,
        "dt": sim.step_dt,
        "final": {"t": trace.t[-1], "n_low": trace.n_low[-1], "n_high": trace.n_high[-1], "cum_x1": trace.cum[-1]},
        "diverged": trace.diverged,
        "diverged_at": trace.diverged_at,
        "energy_monitor_flags": trace.monitor_flags,
        "blowup_monitor": cert.to_dict(),
    }
    return report, trace


def _cmd_picard(cfg, grid, theta0):
    try:
        history, rep = picard_solve(theta0, cfg.r, cfg.alpha, max_iter=cfg.max_iter, tol=cfg.tol, nodes=cfg.nodes)
    except PicardError as e:
        return {"status": VIOLATED, "reason": str(e), "picard": e.report.to_dict()}, NormTrace()
    conditions = rep.split.conditions()
    in_ball = rep.final_sup_norm <= cfg.r and rep.final_l1_norm <= cfg.r
    ok = rep.converged and all(conditions.values()) and in_ball
    report = {
        "status": CERTIFIED if ok else VIOLATED,
        "conditions": conditions,
        "in_ball": in_ball,
        "picard": rep.to_dict(),
    }
    return report, _history_trace(history, cfg.alpha)


def _cmd_certify(cfg, grid, theta0):
    cert, trace = certify_small_data(theta0, _sim_config(cfg, grid), check_convergence=cfg.check_convergence)
    return {"status": cert.status, "certificate": cert.to_dict()}, trace


def _cmd_verify(cfg, grid, theta0):
    summary = fuzz_inequalities(cfg.trials, alphas=cfg.alphas, n=cfg.fuzz_n, seed=cfg.seed)
    return {"status": CERTIFIED if summary.passed else VIOLATED, "fuzz": summary.to_dict()}, NormTrace()


def _cmd_scaling(cfg, grid, theta0):
    cert = scaling_check(theta0, cfg.lam, cfg.alpha, t=cfg.t_end)
    return {"status": cert.status, "certificate": cert.to_dict()}, NormTrace()


def _cmd_perturb(cfg, grid, theta0):
    if cfg.delta_ratio == 0:
        delta0 = SpectralField.zeros(grid)
    else:
        # the perturbation stream is derived from, but independent of, the run seed
        delta0 = random_field(grid, np.random.default_rng([cfg.seed, 1]), kmin=grid.dxi, kmax=cfg.init.kmax * grid.dxi)
        sigma = 1 - 2 * cfg.alpha
        delta0 = delta0 * (cfg.delta_ratio * xnorm(theta0, sigma) / xnorm(delta0, sigma))
    cert, trace = perturbation_decay(theta0, delta0, _sim_config(cfg, grid), check_convergence=cfg.check_convergence)
    return {"status": cert.status, "certificate": cert.to_dict()}, trace


_COMMANDS = {
    "simulate": _cmd_simulate,
    "picard": _cmd_picard,
    "certify-small-data": _cmd_certify,
    "verify-lemmas": _cmd_verify,
    "scaling-check": _cmd_scaling,
    "perturb": _cmd_perturb,
}


def run(cfg: RunConfig, out_dir: str | Path | None = None) -> int:
    """Execute ``cfg.command`` and write ``trace.csv``, ``report.json`` and ``config_echo.yaml``."""
    out = Path(cfg.out_dir if out_dir is None else out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = Grid(cfg.n, cfg.L)
    theta0 = generate_initial(cfg.init, grid, cfg.alpha, cfg.seed)
    report, trace = _COMMANDS[cfg.command](cfg, grid, theta0)
    report = {"command": cfg.command, "alpha": cfg.alpha, "seed": cfg.seed, **report}

    with open(out / "trace.csv", "w", newline="") as fh:
        trace.write_csv(fh)
    with open(out / "report.json", "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
    (out / "config_echo.yaml").write_text(dump_config(cfg))
    return EXIT_CODES[report["status"]]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sqg-lab", description="Dissipative SQG numerical laboratory.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", help="output directory (overrides out_dir)")
    p.add_argument("--seed", type=int, help="random seed (overrides seed)")
    p.add_argument("--parallel", action="store_true", help="multi-threaded FFTs; norms reproducible to ~1e-13 only")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        text = Path(args.config).read_text()
        cfg = parse_config(text, command=args.command, seed=args.seed, out_dir=args.out)
    except (OSError, ConfigError) as e:
        print(f"sqg-lab: {e}", file=sys.stderr)
        return EXIT_USAGE
    workers = -1 if args.parallel else 1
    try:
        with scipy.fft.set_workers(workers):
            return run(cfg)
    except ValueError as e:
        print(f"sqg-lab: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
