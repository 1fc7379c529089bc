"""Run configuration: flat key = value files, overrides, and hashing."""

import hashlib
from dataclasses import dataclass, fields
from typing import Optional

from .arakawa import SCHEMES
from .diagnostics import format_float
from .ordering import ORDERING_TAGS

__all__ = ["RunConfig", "ConfigError", "parse_config", "config_hash"]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything that defines a trajectory plus output plumbing.

    i1 is the 1-based start variable of the MinCom ordering, matching
    the ordering file header. max_steps caps the number of steps of one
    invocation (budget guard); the run stops cleanly at the cap and can
    be resumed later.
    """

    N: int = 8
    scheme: str = "JEZ"
    ordering_tag: str = "MinCom"
    order: int = 2
    tau: float = 0.1
    T0: float = 1.0e3
    T_end: float = 1.0e4
    seed: int = 0
    E_target: float = 7.0
    Z_target: float = 20.0
    i1: int = 1
    diag_every: int = 100
    checkpoint_every: int = 10000
    max_steps: Optional[int] = None
    output_dir: str = ""

    def validate(self) -> "RunConfig":
        if self.N < 4 or self.N % 2 != 0:
            raise ConfigError("N must be even and at least 4")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if self.ordering_tag not in ORDERING_TAGS:
            raise ConfigError(f"ordering_tag must be one of {ORDERING_TAGS}")
        if self.order not in (2, 4):
            raise ConfigError("order must be 2 or 4")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if not self.T0 < self.T_end:
            raise ConfigError("T0 must be smaller than T_end")
        if self.E_target <= 0 or self.Z_target <= 0:
            raise ConfigError("energy and enstrophy targets must be positive")
        if not 1 <= self.i1 <= self.N**2:
            raise ConfigError("i1 out of range")
        if self.diag_every < 1 or self.checkpoint_every < 1:
            raise ConfigError("cadence fields must be at least 1")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("max_steps must be at least 1 when set")
        if not self.output_dir:
            raise ConfigError("output_dir is required")
        return self


def _coerce(name: str, kind, raw: str):
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind == Optional[int]:
            return None if raw.lower() in ("", "none") else int(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config(path: Optional[str] = None, overrides=()) -> RunConfig:
    """Build a RunConfig from an optional file plus key=value overrides.

    File syntax: one `key = value` per line, # comments and blank lines
    ignored. Overrides are applied after the file, in order.
    """
    kinds = {f.name: f.type for f in fields(RunConfig)}
    values = {}

    def absorb(text: str, where: str):
        if "=" not in text:
            raise ConfigError(f"{where}: expected key = value, got {text!r}")
        key, raw = text.split("=", 1)
        key = key.strip()
        if key not in kinds:
            raise ConfigError(f"{where}: unknown key {key!r}")
        values[key] = _coerce(key, kinds[key], raw)

    if path is not None:
        try:
            with open(path) as fh:
                for ln, line in enumerate(fh, 1):
                    line = line.split("#", 1)[0].strip()
                    if line:
                        absorb(line, f"{path}:{ln}")
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    for item in overrides:
        absorb(item, "override")
    return RunConfig(**values).validate()


def render_config(cfg: RunConfig) -> str:
    """Canonical text form; parses back to an identical config."""
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if v is None:
            v = "none"
        elif isinstance(v, float):
            v = format_float(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    """sha256 over the trajectory-defining fields.

    output_dir (plumbing) and max_steps (per-invocation budget) are
    excluded so a capped or relocated continuation still matches.
    """
    skip = {"output_dir", "max_steps"}
    parts = []
    for f in sorted(fields(RunConfig), key=lambda f: f.name):
        if f.name in skip:
            continue
        v = getattr(cfg, f.name)
        parts.append(f"{f.name}={format_float(v) if isinstance(v, float) else v}")
    return hashlib.sha256("\n".join(parts).encode()).hexdigest()
