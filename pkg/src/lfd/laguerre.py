"""Integral Laguerre transform in time and the derivative recurrences.

The basis is the orthonormal Laguerre family ``l^a_m(x)`` evaluated at
``x = eta * t``.  Analysis and synthesis both carry a ``sqrt(eta)`` factor so
that ``analyze`` and ``synthesize`` form an exact inverse pair in time units:

    g_m  = sqrt(eta) * int_0^inf (eta t)^(-a/2) g(t) l^a_m(eta t) dt
    g(t) = sqrt(eta) * (eta t)^(a/2) * sum_m g_m l^a_m(eta t)

Time derivatives map to ``(eta/2)^k g_m + Phi_k(g)_m`` where ``Phi_k`` are
lower-triangular sums over the earlier coefficients (see ``PhiState``).
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, StateError
from .wavelet import WaveletSpec, wavelet_eval

log = logging.getLogger(__name__)

_RESCALE_BITS = 500
_RESCALE_LIMIT = 2.0**_RESCALE_BITS
_BLOCK = 128


@dataclass(frozen=True)
class LaguerreSpec:
    """Transform parameters: order ``alpha``, scale ``eta`` (1/s), series length and record length (s)."""

    alpha: int
    eta: float
    n_terms: int
    horizon: float

    def __post_init__(self):
        if int(self.alpha) != self.alpha or self.alpha < 0:
            raise DomainError(f"alpha must be a non-negative integer, got {self.alpha}")
        if not self.eta > 0:
            raise DomainError(f"eta must be positive, got {self.eta}")
        if int(self.n_terms) != self.n_terms or self.n_terms < 1:
            raise DomainError(f"n_terms must be >= 1, got {self.n_terms}")
        if not self.horizon > 0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")

    @property
    def eta_tilde(self):
        return 0.5 * self.eta


@dataclass
class CoefficientSeries:
    """Laguerre coefficients ``values[m, ...]`` for m = 0..n_terms-1.

    Trailing axes (e.g. one column per trace) are allowed.
    """

    spec: LaguerreSpec
    values: np.ndarray
    warnings: tuple = ()

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[:1] != (self.spec.n_terms,):
            raise DomainError(
                f"expected {self.spec.n_terms} coefficients, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DomainError("coefficient series contains non-finite values")


def _kernel_rows(x, alpha, m_max, power):
    """Yield ``q_m(x) * x**power * exp(-x/2)`` for m = 0..m_max.

    ``q_m = sqrt(m!/(m+alpha)!) L^alpha_m`` follows the normalized three-term
    recurrence.  Magnitudes are carried as mantissa and binary exponent so
    nothing overflows for large ``m`` or ``x``.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        log0 = -0.5 * x - 0.5 * gammaln(alpha + 1.0)
        if power:
            log0 = log0 + power * np.log(x)
    zero = np.isneginf(log0)
    log2_0 = np.where(zero, 0.0, log0 / math.log(2.0))
    expo = np.floor(log2_0).astype(np.int64)
    q = np.where(zero, 0.0, np.exp2(log2_0 - expo))
    q_prev = np.zeros_like(q)
    yield np.ldexp(q, expo)
    for m in range(m_max):
        q_next = ((2 * m + 1 + alpha - x) * q - math.sqrt(m * (m + alpha)) * q_prev) / math.sqrt(
            (m + 1) * (m + 1 + alpha)
        )
        q_prev, q = q, q_next
        big = np.abs(q) > _RESCALE_LIMIT
        if big.any():
            q = np.where(big, np.ldexp(q, -_RESCALE_BITS), q)
            q_prev = np.where(big, np.ldexp(q_prev, -_RESCALE_BITS), q_prev)
            expo = expo + _RESCALE_BITS * big
        yield np.ldexp(q, expo)


def _check_times(t):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("time values must be finite")
    if np.any(t < 0):
        raise DomainError("time values must be non-negative")
    return t


def laguerre_function_row(spec, t, m_max):
    """Orthonormal Laguerre functions ``l^alpha_m(eta t)`` for m = 0..m_max.

    Returns shape ``(m_max + 1,) + shape(t)``.
    """
    t = _check_times(t)
    if m_max < 0 or m_max > spec.n_terms:
        raise DomainError(f"m_max must lie in [0, {spec.n_terms}], got {m_max}")
    x = spec.eta * t
    return np.stack(list(_kernel_rows(x, spec.alpha, m_max, 0.5 * spec.alpha)))


def simpson_weights(n, dt):
    """Composite Simpson weights on ``n`` samples (``n`` odd)."""
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (dt / 3.0)


def oscillation_samples(spec, t, dt, m=None):
    """Samples per local period of ``l_m(eta t)`` at time ``t`` (WKB estimate)."""
    m = spec.n_terms - 1 if m is None else m
    x = spec.eta * max(t, dt)
    nu = 4 * m + 2 * spec.alpha + 2
    k2 = nu / (4.0 * x) - 0.25 + (1.0 - spec.alpha**2) / (4.0 * x * x)
    if k2 <= 0:
        return math.inf
    return 2.0 * math.pi / (spec.eta * math.sqrt(k2) * dt)


def analyze(signal, dt, spec):
    """Direct transform of a uniformly sampled signal starting at t = 0.

    ``signal`` has time on axis 0; extra axes are transformed independently.
    The integral uses composite Simpson with the signal taken as zero past its
    last sample.
    """
    g = np.asarray(signal, dtype=float)
    if g.size == 0 or g.shape[0] == 0:
        raise DomainError("cannot transform an empty signal")
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if not np.all(np.isfinite(g)):
        raise DomainError("signal contains non-finite samples")
    if g.shape[0] % 2 == 0:
        g = np.concatenate([g, np.zeros((1,) + g.shape[1:])])
    n = g.shape[0]
    weighted = g * (simpson_weights(n, dt) * math.sqrt(spec.eta)).reshape((n,) + (1,) * (g.ndim - 1))

    flat = np.abs(g.reshape(n, -1))
    live = np.flatnonzero(np.any(flat != 0.0, axis=1))
    out = np.zeros((spec.n_terms,) + g.shape[1:])
    notes = []
    if live.size == 0:
        return CoefficientSeries(spec, out)
    lo, hi = live[0], live[-1] + 1
    x = spec.eta * dt * np.arange(lo, hi)
    sub = weighted[lo:hi]

    rows = []
    start = 0
    for m, row in enumerate(_kernel_rows(x, spec.alpha, spec.n_terms - 1, 0.0)):
        rows.append(row)
        if len(rows) == _BLOCK or m == spec.n_terms - 1:
            block = np.stack(rows)
            out[start : start + len(rows)] = np.tensordot(block, sub, axes=(1, 0))
            start += len(rows)
            rows = []

    strong = np.flatnonzero(np.any(flat > 1e-8 * flat.max(), axis=1))
    per_period = oscillation_samples(spec, strong[0] * dt, dt)
    if per_period < 4.0:
        msg = (
            f"dt={dt:g} s gives {per_period:.2f} samples per oscillation of the "
            f"m={spec.n_terms - 1} basis function; high-order coefficients are unreliable"
        )
        log.warning(msg)
        notes.append(msg)
    if abs(g[-1]).max() > 0.01 * abs(g).max() and g.shape[0] > 1:
        msg = "signal does not decay at the end of the record"
        log.warning(msg)
        notes.append(msg)
    return CoefficientSeries(spec, out, tuple(notes))


def synthesize(coeffs, times):
    """Evaluate the partial sum of all ``n_terms`` coefficients at ``times``.

    Returns shape ``shape(times) + values.shape[1:]``.
    """
    spec = coeffs.spec
    t = _check_times(times)
    flat_t = np.atleast_1d(t).ravel()
    vals = coeffs.values
    trailing = vals.shape[1:]
    vals2 = vals.reshape(spec.n_terms, -1)
    out = np.zeros((flat_t.size, vals2.shape[1]))
    x = spec.eta * flat_t

    rows = []
    start = 0
    for m, row in enumerate(_kernel_rows(x, spec.alpha, spec.n_terms - 1, float(spec.alpha))):
        rows.append(row)
        if len(rows) == _BLOCK or m == spec.n_terms - 1:
            block = np.stack(rows)
            out += block.T @ vals2[start : start + len(rows)]
            start += len(rows)
            rows = []
    out *= math.sqrt(spec.eta)
    return out.reshape(t.shape + trailing)


def synthesis_weights(spec, t):
    """Per-harmonic weights ``w_m`` with ``g(t) = sum_m w_m g_m``."""
    t = float(_check_times(t))
    row = laguerre_function_row(spec, t, spec.n_terms - 1)
    return math.sqrt(spec.eta) * (spec.eta * t) ** (0.5 * spec.alpha) * row


# -- derivative recurrences -------------------------------------------------------


def history_weight(k, alpha):
    """``sqrt((k+alpha)!/k!)``, computed through log-gamma."""
    if alpha == 0:
        return 1.0
    return math.exp(0.5 * (gammaln(k + alpha + 1.0) - gammaln(k + 1.0)))


def _norm_factor(n, alpha):
    if alpha == 0:
        return 1.0
    return math.exp(0.5 * (gammaln(n + 1.0) - gammaln(n + alpha + 1.0)))


@dataclass
class PhiState:
    """Running sums realizing Phi_1 and Phi_2 over the coefficients seen so far.

    ``weighted_sum`` holds ``sum_k w_k g_k`` and ``moment_sum`` holds
    ``sum_k k w_k g_k`` over k < count.  Both may be arrays, in which case every
    element is an independent grid node.
    """

    eta: float
    alpha: int = 0
    weighted_sum: np.ndarray = field(default_factory=lambda: np.zeros(()))
    moment_sum: np.ndarray = field(default_factory=lambda: np.zeros(()))
    count: int = 0

    @classmethod
    def zeros(cls, spec, shape=()):
        return cls(spec.eta, spec.alpha, np.zeros(shape), np.zeros(shape), 0)

    def reset(self):
        self.weighted_sum[...] = 0.0
        self.moment_sum[...] = 0.0
        self.count = 0

    def copy(self):
        return PhiState(
            self.eta, self.alpha, self.weighted_sum.copy(), self.moment_sum.copy(), self.count
        )


def phi_update(state, new_coeff, spec):
    """Fold coefficient number ``state.count`` into the running sums (in place)."""
    if state.count >= spec.n_terms:
        raise StateError(f"accumulator already holds {state.count} of {spec.n_terms} terms")
    new_coeff = np.asarray(new_coeff, dtype=float)
    if not np.all(np.isfinite(new_coeff)):
        raise StateError("non-finite coefficient fed to accumulator")
    n = state.count
    if state.alpha == 0:
        state.weighted_sum += new_coeff
        if n:
            state.moment_sum += n * new_coeff
    else:
        w = history_weight(n, state.alpha)
        state.weighted_sum += w * new_coeff
        state.moment_sum += (n * w) * new_coeff
    state.count = n + 1
    return state


def phi1(state):
    """``Phi_1`` of the next coefficient given the history in ``state``."""
    return state.eta * _norm_factor(state.count, state.alpha) * state.weighted_sum


def phi2(state):
    """``Phi_2`` of the next coefficient given the history in ``state``."""
    n = state.count
    c = state.eta**2 * _norm_factor(n, state.alpha)
    return c * (n * state.weighted_sum - state.moment_sum)


def phi_direct(coeffs, alpha, eta, order):
    """Literal O(n) evaluation of Phi_1 or Phi_2 at n = len(coeffs)."""
    g = np.asarray(coeffs, dtype=float)
    n = g.shape[0]
    k = np.arange(n)
    w = np.exp(0.5 * (gammaln(k + alpha + 1.0) - gammaln(k + 1.0)))
    c = math.exp(0.5 * (gammaln(n + 1.0) - gammaln(n + alpha + 1.0)))
    if order == 1:
        return eta * c * np.tensordot(w, g, axes=(0, 0))
    if order == 2:
        return eta**2 * c * np.tensordot((n - k) * w, g, axes=(0, 0))
    raise DomainError(f"order must be 1 or 2, got {order}")


# -- parameter selection ------------------------------------------------------------


def _probe_grid(horizon, wavelet, dt):
    end = horizon + wavelet.half_support()
    t = np.arange(0.0, end + dt, dt)
    return t, wavelet_eval(wavelet.shifted(horizon), t)


def shifted_wavelet_error(spec, wavelet=None, dt=None):
    """Relative L2 error reconstructing the wavelet re-centred at ``spec.horizon``."""
    wavelet = wavelet or WaveletSpec()
    if dt is None:
        dt = _probe_dt(spec.horizon, wavelet, spec.n_terms)
    t, g = _probe_grid(spec.horizon, wavelet, dt)
    rec = synthesize(analyze(g, dt, spec), t)
    return float(np.linalg.norm(rec - g) / np.linalg.norm(g))


def _probe_dt(horizon, wavelet, n_max):
    t_lo = max(horizon - wavelet.half_support(), 0.5 * horizon)
    omega_cap = n_max / t_lo
    return min(1.0 / (64.0 * wavelet.f0), math.pi / (6.0 * omega_cap))


def choose_laguerre_params(
    horizon, wavelet=None, epsilon=1e-3, n_min=64, n_max=8192, eta_points=40
):
    """Pick ``(alpha=0, eta, n)`` so the wavelet re-centred at ``horizon`` is reproduced.

    Series lengths double from ``n_min``; for each length a logarithmic eta
    grid is scanned, with the truncation error of a candidate taken from
    Parseval on a single analysis pass.  The smallest passing ``n`` wins, ties
    broken by the smallest ``eta``, and the winner is confirmed by explicit
    synthesis.
    """
    wavelet = wavelet or WaveletSpec()
    if not horizon > 0 or not epsilon > 0:
        raise DomainError("horizon and epsilon must be positive")
    best = (math.inf, None, None)
    n = n_min
    while n <= n_max:
        dt = _probe_dt(horizon, wavelet, n)
        t, g = _probe_grid(horizon, wavelet, dt)
        energy = float(np.sum(simpson_weights(len(g) | 1, dt)[: len(g)] * g * g))
        passing = []
        for eta in np.geomspace(0.05 * n / horizon, 4.0 * n / horizon, eta_points):
            spec = LaguerreSpec(0, float(eta), n, horizon)
            c = analyze(g, dt, spec).values
            err = math.sqrt(max(energy - float(c @ c), 0.0) / energy)
            if err < best[0]:
                best = (err, n, float(eta))
            if err < epsilon:
                passing.append(spec)
        for spec in passing:
            if shifted_wavelet_error(spec, wavelet, dt) < epsilon:
                return spec
        n *= 2
    raise DomainError(
        f"no (eta, n) within search bounds reaches epsilon={epsilon:g}; best error "
        f"{best[0]:.3g} at n={best[1]}, eta={best[2]}"
    )
