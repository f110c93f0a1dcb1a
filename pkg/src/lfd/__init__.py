"""Laguerre finite-difference one-way wave-equation solver."""

from .config import RunConfig, load_config, parse_config
from .laguerre import LaguerreSpec, analyze, choose_laguerre_params, synthesize
from .migration import run_impulse, run_migration, run_snapshot

__all__ = [
    "LaguerreSpec",
    "RunConfig",
    "analyze",
    "choose_laguerre_params",
    "load_config",
    "parse_config",
    "run_impulse",
    "run_migration",
    "run_snapshot",
    "synthesize",
]
__version__ = "0.1.0"
