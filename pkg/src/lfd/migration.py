"""End-to-end drivers: impulse response, post-stack migration and snapshots."""

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, signal

from .config import RunConfig
from .continuation import (
    DepthOperatorCache,
    Grid2D,
    MonitorConfig,
    PadeExpansion,
    PhiVolume,
    step_harmonic,
)
from .errors import ConfigError, DomainError
from .laguerre import (
    CoefficientSeries,
    LaguerreSpec,
    analyze,
    choose_laguerre_params,
    oscillation_samples,
    synthesis_weights,
    synthesize,
)
from .model_io import (
    SeismicSection,
    VelocityModel,
    prepare_exploding_reflector,
    read_grid,
    transform_section,
)
from .richardson import DualMesh, fine_velocity, global_correction_sweep
from .stencil import by_name
from .wavelet import WaveletSpec, wavelet_eval

log = logging.getLogger(__name__)

PROGRESS_FIELDS = ("m", "seconds", "max_amplitude", "factorizations")


@dataclass
class ProgressRecord:
    m: int
    seconds: float
    max_amplitude: float
    factorizations: int


class ProgressLog:
    """Per-harmonic timing and amplitude records, optionally mirrored to CSV."""

    def __init__(self, path=None):
        self.records = []
        self._fh = None
        self._writer = None
        if path is not None:
            self._fh = open(path, "w", newline="")
            self._writer = csv.writer(self._fh)
            self._writer.writerow(PROGRESS_FIELDS)

    def add(self, record):
        self.records.append(record)
        if self._writer is not None:
            self._writer.writerow([record.m, f"{record.seconds:.6f}", f"{record.max_amplitude:.9g}",
                                   record.factorizations])
            self._fh.flush()

    def close(self):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def pad_columns(values, pad, mode="constant"):
    """Add ``pad`` columns on each side of the last axis."""
    if pad == 0:
        return np.asarray(values, dtype=float)
    width = [(0, 0)] * (np.ndim(values) - 1) + [(pad, pad)]
    return np.pad(np.asarray(values, dtype=float), width, mode=mode)


def trim_columns(values, pad):
    return values[..., pad: values.shape[-1] - pad] if pad else values


class Marcher:
    """Runs the harmonic loop over one velocity model and accumulates snapshots.

    ``velocity`` (nz, nx) already includes any lateral padding.  Snapshots are
    accumulated on the fly as ``sum_m w_m(t) u^m``, so no coefficient volume is
    stored unless ``keep_volume`` is requested.
    """

    def __init__(self, velocity, hx, hz, spec, coeffs, pade=None, depth_order=4,
                 monitor_factor=10.0, threads=1, history="independent", half_rule="linear"):
        self.velocity = np.asarray(velocity, dtype=float)
        nz, nx = self.velocity.shape
        self.grid = Grid2D(nx, nz, hx, hz)
        self.spec = spec
        self.coeffs = coeffs
        self.pade = pade or PadeExpansion()
        if depth_order not in (2, 4):
            raise ConfigError(f"depth_order must be 2 or 4, got {depth_order}")
        self.depth_order = depth_order
        self.monitor_factor = monitor_factor
        self.threads = max(1, int(threads))
        self.history = history
        self.half_rule = half_rule
        self.cache = DepthOperatorCache(spec.eta_tilde, coeffs, hx, self.pade)

    def run(self, surface, times, progress=None, keep_volume=False):
        """Continue ``surface`` (n_terms, nx) and return {t: image (nz, nx)}."""
        spec = self.spec
        surface = np.asarray(surface, dtype=float)
        if surface.shape != (spec.n_terms, self.grid.nx):
            raise DomainError(f"surface data shape {surface.shape} does not match "
                              f"({spec.n_terms}, {self.grid.nx})")
        times = [float(t) for t in times]
        for t in times:
            if not 0 <= t <= spec.horizon * (1 + 1e-12):
                raise DomainError(f"snapshot time {t} outside [0, {spec.horizon}]")
        weights = {t: synthesis_weights(spec, t) for t in times}
        images = {t: np.zeros(self.velocity.shape) for t in times}
        volume = [] if keep_volume else None
        monitor = MonitorConfig(self.monitor_factor, float(np.max(np.abs(surface))))
        grid = self.grid
        nz, nx = self.velocity.shape
        state = PhiVolume.zeros(spec, nz, nx, self.pade.n_terms)
        dual = DualMesh(grid)
        fine_state = None
        if self.depth_order == 4 and self.history == "independent":
            fine_state = PhiVolume.zeros(spec, dual.fine.nz, nx, self.pade.n_terms)
        rows = rows_fine = None
        executor = ThreadPoolExecutor(self.threads) if self.threads > 1 else None
        try:
            for m in range(spec.n_terms):
                start = time.perf_counter()
                if rows is None:
                    rows = self.cache.prepare(self.velocity, grid.hz)
                    if self.depth_order == 4:
                        rows_fine = self.cache.prepare(fine_velocity(self.velocity), dual.fine.hz)
                if self.depth_order == 2:
                    u, _ = step_harmonic(m, surface[m], state, self.cache, grid, self.velocity, spec,
                                         monitor, executor, rows, self.half_rule)
                else:
                    u, _, _ = global_correction_sweep(
                        m, surface[m], dual, state, self.cache, self.velocity, spec, monitor,
                        executor, True, self.history, fine_state, self.half_rule, rows, rows_fine)
                for t in times:
                    images[t] += weights[t][m] * u
                if volume is not None:
                    volume.append(u.copy())
                if progress is not None:
                    progress.add(ProgressRecord(m, time.perf_counter() - start,
                                                float(np.max(np.abs(u))), self.cache.factorizations))
        finally:
            if executor is not None:
                executor.shutdown()
        if volume is not None:
            volume = CoefficientSeries(spec, np.stack(volume))
        return images, volume


def _wavelet(config):
    return WaveletSpec(config.f0, config.t0, config.g)


def resolve_spec(config, horizon, wavelet):
    """Laguerre parameters from the config, searching for any left unset."""
    if config.eta is not None and config.nterms is not None:
        return LaguerreSpec(config.alpha, config.eta, config.nterms, horizon)
    if config.alpha != 0:
        raise ConfigError("parameter search supports alpha = 0 only; set eta and nterms explicitly")
    found = choose_laguerre_params(horizon, wavelet, epsilon=config.epsilon)
    eta = config.eta if config.eta is not None else found.eta
    n = config.nterms if config.nterms is not None else found.n_terms
    return LaguerreSpec(config.alpha, eta, n, horizon)


def trace_coefficients(spec, wavelet, dt=None):
    """Laguerre coefficients of the source pulse on [0, horizon]."""
    if dt is None:
        dt = min(1.0 / (64.0 * wavelet.f0), spec.horizon / 2000.0)
        t_first = max(wavelet.t0 - wavelet.half_support(), dt)
        while oscillation_samples(spec, t_first, dt) < 8.0:
            dt *= 0.5
    n = int(np.floor(spec.horizon / dt + 1e-9)) + 1
    t = np.arange(n) * dt
    return analyze(wavelet_eval(wavelet, t), dt, spec).values


def _velocity_model(config):
    const = config.constant_velocity()
    if config.velocity is None:
        raise ConfigError("config must set 'velocity' (m/s or path to an LFDG velocity grid)")
    if const is not None:
        if config.nx is None or config.nz is None:
            raise ConfigError("constant velocity needs nx and nz")
        return VelocityModel.constant(const, config.nx, config.nz, config.hx, config.hz)
    model = read_grid(config.velocity)
    if not isinstance(model, VelocityModel):
        raise ConfigError(f"{config.velocity} is not a velocity grid")
    return model


@dataclass
class ImpulseResult:
    images: dict
    spec: LaguerreSpec
    model: VelocityModel
    source_index: int
    volume: CoefficientSeries = None

    @property
    def image(self):
        return self.images[max(self.images)]


def run_impulse(config, times=None, progress=None, keep_volume=False, threads=None):
    """Single surface trace at the centre node carrying the source pulse."""
    model = _velocity_model(config)
    if times is None:
        if config.snapshot_time is None:
            raise ConfigError("impulse run needs snapshot_time")
        times = [config.snapshot_time]
    horizon = max(times)
    wavelet = _wavelet(config)
    spec = resolve_spec(config, horizon, wavelet)
    pad = config.pad_x
    centre = model.nx // 2
    surface = np.zeros((spec.n_terms, model.nx))
    surface[:, centre] = trace_coefficients(spec, wavelet)
    marcher = Marcher(pad_columns(model.c, pad, "edge"), model.hx, model.hz, spec, by_name(config.stencil),
                      depth_order=config.depth_order, monitor_factor=config.monitor_factor,
                      threads=threads or config.worker_count)
    images, volume = marcher.run(pad_columns(surface, pad), times, progress, keep_volume)
    images = {t: trim_columns(img, pad) for t, img in images.items()}
    if volume is not None:
        volume = CoefficientSeries(spec, trim_columns(volume.values, pad))
    return ImpulseResult(images, spec, model, centre, volume)


def run_migration(model, section, config, progress=None, threads=None):
    """Exploding-reflector depth image of a zero-offset section.

    The record is reversed in time before the transform so that continuing
    downward and evaluating at the record length brings each reflection back
    to its source depth.
    """
    if not isinstance(model, VelocityModel):
        model = read_grid(model)
    if not isinstance(section, SeismicSection):
        section = read_grid(section)
    if not isinstance(model, VelocityModel) or not isinstance(section, SeismicSection):
        raise ConfigError("migration needs a velocity grid and a section grid")
    if model.nx != section.nx or not np.isclose(model.hx, section.dx, rtol=1e-9):
        raise DomainError(f"model ({model.nx} x {model.hx} m) and section ({section.nx} x {section.dx} m) "
                          "do not share the trace grid")
    half = model if model.halved else prepare_exploding_reflector(model)
    horizon = section.record_length
    spec = resolve_spec(config, horizon, _wavelet(config))
    reversed_section = SeismicSection(section.data[::-1].copy(), section.dt, section.dx, section.origin_x)
    coeffs = transform_section(reversed_section, spec).values
    pad = config.pad_x
    marcher = Marcher(pad_columns(half.c, pad, "edge"), half.hx, half.hz, spec, by_name(config.stencil),
                      depth_order=config.depth_order, monitor_factor=config.monitor_factor,
                      threads=threads or config.worker_count)
    t_image = config.snapshot_time if config.snapshot_time is not None else horizon
    images, _ = marcher.run(pad_columns(coeffs, pad), [t_image], progress)
    return trim_columns(images[t_image], pad)


def run_snapshot(source, t, progress=None):
    """Field at time ``t`` from a stored coefficient volume or by rerunning a config."""
    if isinstance(source, CoefficientSeries):
        tt = np.asarray(t, dtype=float)
        if np.any(tt < 0) or np.any(tt > source.spec.horizon):
            raise DomainError(f"snapshot time {t} outside [0, {source.spec.horizon}]")
        return synthesize(source, t)
    if isinstance(source, RunConfig):
        return run_impulse(source, times=[t], progress=progress).images[float(t)]
    raise DomainError("run_snapshot needs a CoefficientSeries or a RunConfig")


def ray_profile(image, hx, hz, source_x_index, angle_deg, r_max, dr=None):
    """Image sampled along a ray from the surface source (bilinear)."""
    dr = dr or 0.25 * min(hx, hz)
    r = np.arange(0.0, r_max, dr)
    theta = np.radians(angle_deg)
    xi = source_x_index + r * np.sin(theta) / hx
    zi = r * np.cos(theta) / hz
    return r, ndimage.map_coordinates(image, [zi, xi], order=1, mode="constant")


def wavefront_radius(image, hx, hz, source_x_index, angle_deg, r_max, threshold=0.25):
    """Distance from the source to the leading arrival along a ray.

    The leading arrival is the outermost envelope maximum whose height and
    prominence both reach ``threshold`` of the ray's envelope peak; energy
    behind it (the wake of a line source) is ignored.  The radius is the
    energy centroid of that lobe, taken where its envelope exceeds 10% of
    the lobe peak.
    """
    r, prof = ray_profile(image, hx, hz, source_x_index, angle_deg, r_max)
    env = np.abs(signal.hilbert(prof))
    level = threshold * env.max()
    peaks, _ = signal.find_peaks(env, height=level, prominence=level)
    i = int(peaks[-1]) if len(peaks) else int(np.argmax(env))
    floor = 0.1 * env[i]
    lo = i
    while lo > 0 and env[lo - 1] >= floor:
        lo -= 1
    hi = i
    while hi < len(env) - 1 and env[hi + 1] >= floor:
        hi += 1
    energy = prof[lo: hi + 1] ** 2
    return float(np.sum(r[lo: hi + 1] * energy) / np.sum(energy))
