"""Plain ``key = value`` run configuration."""

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError


@dataclass
class RunConfig:
    """Settings shared by the impulse, snapshot and migration drivers.

    ``None`` means "derive": ``nx``/``nz`` from the model, ``eta``/``nterms``
    from the parameter search, ``snapshot_time`` from the record length.
    ``velocity`` is a constant in m/s or a path to an LFDG velocity grid.
    """

    hx: float = 1.0
    hz: float = 1.0
    nx: int = None
    nz: int = None
    eta: float = None
    alpha: int = 0
    nterms: int = None
    depth_order: int = 4
    pad_x: int = 12
    snapshot_time: float = None
    stencil: str = "drp_paper"
    monitor_factor: float = 10.0
    threads: int = None
    velocity: str = None
    f0: float = 30.0
    t0: float = 0.2
    g: float = 4.0
    epsilon: float = 1e-3

    def __post_init__(self):
        if self.depth_order not in (2, 4):
            raise ConfigError(f"depth_order must be 2 or 4, got {self.depth_order}")
        if self.pad_x < 0:
            raise ConfigError("pad_x must be >= 0")
        if not (self.hx > 0 and self.hz > 0):
            raise ConfigError("hx and hz must be positive")
        if self.monitor_factor <= 0:
            raise ConfigError("monitor_factor must be positive")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")

    @property
    def worker_count(self):
        return self.threads or os.cpu_count() or 1

    def constant_velocity(self):
        """The velocity as a float, or None when it names a file."""
        if self.velocity is None:
            return None
        try:
            return float(self.velocity)
        except ValueError:
            return None


_TYPES = {f.name: f.type for f in fields(RunConfig)}
_CASTS = {"hx": float, "hz": float, "nx": int, "nz": int, "eta": float, "alpha": int, "nterms": int,
          "depth_order": int, "pad_x": int, "snapshot_time": float, "stencil": str,
          "monitor_factor": float, "threads": int, "velocity": str, "f0": float, "t0": float,
          "g": float, "epsilon": float}


def parse_config(text, source="<config>"):
    """Parse ``key = value`` lines; ``#`` starts a comment.  Unknown keys are errors."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _CASTS:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate config key {key!r}")
        try:
            values[key] = _CASTS[key](value)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: bad value {value!r} for {key!r}") from None
    return RunConfig(**values)


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))
