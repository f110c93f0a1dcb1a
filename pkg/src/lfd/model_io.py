"""Velocity models, zero-offset sections and the LFDG grid file format.

LFDG layout (little-endian throughout)::

    b"LFDG" | u32 version=1 | u32 kind | u32 n_fast | u32 n_slow
    | f64 d_fast | f64 d_slow | f64 origin_fast | f64 origin_slow
    | n_fast * n_slow f32 payload, fast index contiguous

Kinds: 1 velocity (x fast, z slow), 2 section (x fast, t slow), 3 image
(x fast, z slow), 4 Laguerre coefficients (x fast, m slow; ``d_slow`` holds
eta and ``origin_slow`` holds alpha).
"""

import struct
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .continuation import Grid2D
from .errors import (
    BadMagicError,
    DomainError,
    GridFormatError,
    NonFiniteDataError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from .laguerre import CoefficientSeries, analyze
from .wavelet import WaveletSpec, wavelet_eval

__all__ = [
    "VelocityModel",
    "SeismicSection",
    "GridImage",
    "WaveletSpec",
    "wavelet_eval",
    "read_grid",
    "write_grid",
    "export_csv",
    "prepare_exploding_reflector",
    "transform_section",
    "KIND_VELOCITY",
    "KIND_SECTION",
    "KIND_IMAGE",
    "KIND_COEFFICIENTS",
]

MAGIC = b"LFDG"
VERSION = 1
HEADER = struct.Struct("<4sIIIIdddd")
KIND_VELOCITY, KIND_SECTION, KIND_IMAGE, KIND_COEFFICIENTS = 1, 2, 3, 4


class DecayWarning(UserWarning):
    """Section energy has not died out by the end of the record."""


@dataclass
class VelocityModel:
    """Velocities ``c[iz, ix]`` in m/s on a regular grid."""

    c: np.ndarray
    hx: float
    hz: float
    origin_x: float = 0.0
    origin_z: float = 0.0
    halved: bool = False

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if self.c.ndim != 2:
            raise DomainError("velocity array must be 2D (nz, nx)")
        if not np.all(np.isfinite(self.c)) or np.any(self.c <= 0):
            raise DomainError("velocities must be finite and positive")
        if not (self.hx > 0 and self.hz > 0):
            raise DomainError("grid spacings must be positive")

    @property
    def nz(self):
        return self.c.shape[0]

    @property
    def nx(self):
        return self.c.shape[1]

    @property
    def grid(self):
        return Grid2D(self.nx, self.nz, self.hx, self.hz)

    @classmethod
    def constant(cls, velocity, nx, nz, hx, hz):
        return cls(np.full((nz, nx), float(velocity)), hx, hz)


@dataclass
class SeismicSection:
    """Zero-offset record ``data[it, ix]`` sampled every ``dt`` seconds."""

    data: np.ndarray
    dt: float
    dx: float
    origin_x: float = 0.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2:
            raise DomainError("section must be 2D (nt, nx)")
        if not self.dt > 0 or not self.dx > 0:
            raise DomainError("dt and dx must be positive")
        if not np.all(np.isfinite(self.data)):
            raise DomainError("section contains non-finite samples")

    @property
    def nt(self):
        return self.data.shape[0]

    @property
    def nx(self):
        return self.data.shape[1]

    @property
    def record_length(self):
        """Time of the last sample, ``(nt - 1) * dt``."""
        return (self.nt - 1) * self.dt

    def tail_ratio(self):
        """RMS of the trailing 5% of samples over the RMS of the whole section."""
        total = np.sqrt(np.mean(self.data**2))
        if total == 0:
            return 0.0
        n_tail = max(1, int(np.ceil(0.05 * self.nt)))
        return float(np.sqrt(np.mean(self.data[-n_tail:] ** 2)) / total)

    def check_decay(self, limit=0.01):
        ratio = self.tail_ratio()
        if ratio >= limit:
            warnings.warn(f"trailing 5% of the record holds {ratio:.2%} of the section RMS",
                          DecayWarning, stacklevel=2)
        return ratio


@dataclass
class GridImage:
    """Any LFDG payload not interpreted as a model or section."""

    kind: int
    values: np.ndarray
    d_fast: float
    d_slow: float
    origin_fast: float = 0.0
    origin_slow: float = 0.0


def _pack(kind, values, d_fast, d_slow, origin_fast, origin_slow):
    values = np.asarray(values)
    if values.ndim != 2:
        raise DomainError("grid payload must be 2D (slow, fast)")
    n_slow, n_fast = values.shape
    payload = np.ascontiguousarray(values, dtype="<f4")
    if not np.all(np.isfinite(payload)):
        raise NonFiniteDataError("refusing to write non-finite values")
    head = HEADER.pack(MAGIC, VERSION, kind, n_fast, n_slow, float(d_fast), float(d_slow),
                       float(origin_fast), float(origin_slow))
    return head + payload.tobytes()


def encode(value):
    """Serialize a model, section, image or coefficient series to bytes."""
    if isinstance(value, VelocityModel):
        return _pack(KIND_VELOCITY, value.c, value.hx, value.hz, value.origin_x, value.origin_z)
    if isinstance(value, SeismicSection):
        return _pack(KIND_SECTION, value.data, value.dx, value.dt, value.origin_x, 0.0)
    if isinstance(value, GridImage):
        return _pack(value.kind, value.values, value.d_fast, value.d_slow, value.origin_fast,
                     value.origin_slow)
    if isinstance(value, CoefficientSeries):
        vals = value.values.reshape(value.values.shape[0], -1)
        return _pack(KIND_COEFFICIENTS, vals, 1.0, value.spec.eta, 0.0, float(value.spec.alpha))
    raise DomainError(f"cannot encode {type(value).__name__}")


def decode(blob):
    """Parse LFDG bytes; raises a distinct error per failure class."""
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise BadMagicError("missing LFDG magic bytes")
    if len(blob) < HEADER.size:
        raise TruncatedPayloadError(f"header needs {HEADER.size} bytes, file has {len(blob)}")
    _, version, kind, n_fast, n_slow, d_fast, d_slow, o_fast, o_slow = HEADER.unpack_from(blob)
    if version != VERSION:
        raise UnsupportedVersionError(f"LFDG version {version} is not supported (expected 1)")
    if kind not in (KIND_VELOCITY, KIND_SECTION, KIND_IMAGE, KIND_COEFFICIENTS):
        raise GridFormatError(f"unknown LFDG kind {kind}")
    need = HEADER.size + 4 * n_fast * n_slow
    if len(blob) < need:
        raise TruncatedPayloadError(f"payload needs {need} bytes, file has {len(blob)}")
    if len(blob) > need:
        raise GridFormatError(f"{len(blob) - need} unexpected trailing bytes")
    values = np.frombuffer(blob, dtype="<f4", count=n_fast * n_slow, offset=HEADER.size)
    values = values.reshape(n_slow, n_fast)
    if not np.all(np.isfinite(values)):
        raise NonFiniteDataError("payload contains NaN or infinite values")
    if kind == KIND_VELOCITY:
        return VelocityModel(values.astype(float), d_fast, d_slow, o_fast, o_slow)
    if kind == KIND_SECTION:
        return SeismicSection(values.astype(float), d_slow, d_fast, o_fast)
    return GridImage(kind, values.copy(), d_fast, d_slow, o_fast, o_slow)


def read_grid(path):
    return decode(Path(path).read_bytes())


def write_grid(value, path):
    Path(path).write_bytes(encode(value))


def image_grid(values, hx, hz, origin_x=0.0, origin_z=0.0):
    return GridImage(KIND_IMAGE, np.asarray(values), hx, hz, origin_x, origin_z)


def export_csv(values, path, fmt="%.9g"):
    """Plain-decimal CSV, one row per depth (or time) sample."""
    np.savetxt(path, np.atleast_2d(np.asarray(values, dtype=float)), fmt=fmt, delimiter=",")


def prepare_exploding_reflector(model):
    """Half-velocity copy of ``model`` for exploding-reflector imaging."""
    return replace(model, c=model.c * 0.5, halved=True)


def transform_section(section, spec):
    """Laguerre coefficients of every trace, values shaped (n_terms, nx)."""
    if spec.horizon < section.record_length * (1 - 1e-12):
        raise DomainError(
            f"Laguerre horizon {spec.horizon} s is shorter than the record ({section.record_length} s)"
        )
    return analyze(section.data, section.dt, spec)
