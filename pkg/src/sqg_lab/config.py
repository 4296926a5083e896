"""Strict YAML run configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import yaml

from .initial import InitSpec
from .spectral import require_alpha

__all__ = ["COMMANDS", "ConfigError", "RunConfig", "parse_config", "dump_config"]

COMMANDS = ("simulate", "picard", "certify-small-data", "verify-lemmas", "scaling-check", "perturb")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    alpha: float = 0.75
    n: int = 128
    L: float = 2 * math.pi
    dt: float | None = None
    t_end: float = 1.0
    r: float = 0.04
    seed: int = 0
    init: InitSpec = field(default_factory=InitSpec)
    out_dir: str = "out"
    record_every: int = 1
    # picard
    nodes: int = 64
    max_iter: int = 50
    tol: float = 1e-10
    # verify-lemmas
    trials: int = 1000
    alphas: tuple = (0.55, 0.6, 0.75, 0.9, 1.0)
    fuzz_n: int = 8
    # scaling-check
    lam: int = 2
    # perturb
    delta_ratio: float = 1e-3
    # certificates
    check_convergence: bool = True

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {', '.join(COMMANDS)}, got {self.command!r}")
        try:
            require_alpha(self.alpha)
        except ValueError as e:
            raise ConfigError(f"alpha: {e} (got {self.alpha})") from None
        for a in self.alphas:
            try:
                require_alpha(a)
            except ValueError as e:
                raise ConfigError(f"alphas: {e} (got {a})") from None
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if not 0 < self.r < 1 / 20:
            raise ConfigError(f"r must satisfy 0<r<1/20 (got {self.r})")
        _positive_int("n", self.n, minimum=4)
        if self.n % 2:
            raise ConfigError(f"n must be even, got {self.n}")
        for name in ("record_every", "nodes", "max_iter", "trials", "lam"):
            _positive_int(name, getattr(self, name))
        _positive_int("fuzz_n", self.fuzz_n, minimum=4)
        if self.nodes < 2:
            raise ConfigError(f"nodes must be >= 2, got {self.nodes}")
        for name in ("L", "t_end", "tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not 0 <= self.delta_ratio <= 1e-3:
            raise ConfigError(f"delta_ratio must satisfy 0 <= delta_ratio <= 1e-3, got {self.delta_ratio}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed}")

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["init"] = self.init.to_dict()
        out["alphas"] = list(self.alphas)
        return out


def _positive_int(name: str, v, minimum: int = 1):
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {v!r}")


_RUN_KEYS = {f.name for f in fields(RunConfig)}
_INIT_KEYS = {f.name for f in fields(InitSpec)}


def parse_config(text: str, command: str | None = None, **overrides) -> RunConfig:
    """Parse a YAML document; unknown keys are errors.

    ``init`` may be a kind name or a mapping.  ``command`` fills in a missing
    ``command`` key and must agree with a present one.  ``overrides`` (e.g.
    from the command line) replace document values before validation.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed config: {e}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a key-value mapping")
    doc = {**doc, **{k: v for k, v in overrides.items() if v is not None}}
    unknown = sorted(set(doc) - _RUN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(map(str, unknown))}")
    if command is not None:
        if doc.setdefault("command", command) != command:
            raise ConfigError(f"config command {doc['command']!r} does not match requested command {command!r}")
    if "command" not in doc:
        raise ConfigError("missing required key: command")

    init = doc.get("init", {})
    if isinstance(init, str):
        init = {"kind": init}
    if not isinstance(init, dict):
        raise ConfigError("init must be a kind name or a mapping")
    bad = sorted(set(init) - _INIT_KEYS)
    if bad:
        raise ConfigError(f"unknown init keys: {', '.join(map(str, bad))}")
    try:
        doc["init"] = InitSpec(**init)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None

    for key in ("alpha", "L", "dt", "t_end", "r", "tol", "delta_ratio"):
        if isinstance(doc.get(key), int) and not isinstance(doc[key], bool):
            doc[key] = float(doc[key])
    try:
        return RunConfig(**doc)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)

