"""Depth stepping of the Laguerre-domain one-way system.

For each harmonic ``m`` the field ``u`` is continued downward with a
Crank-Nicolson step.  The auxiliary fields ``psi_s`` of the rational
square-root expansion are eliminated, leaving one banded system per depth:

    [P(A) diag(d) + et * sum_s (b_s/g_s) P_s(A)] u_{k+1}
        = P(A) F_u + et * sum_s P_s(A) F_s

with ``A = diag(c^2) L_x / et^2``, ``M_s = g_s A - I``, ``P = prod M_s`` and
``P_s = P / M_s``.  All ``M_s`` are polynomials in ``A`` and so commute.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import ndimage
from scipy.linalg import blas, lapack

from .banded import (
    band_axpy,
    band_from_stencil,
    band_matvec,
    band_mul,
    band_scale_columns,
    lu_factor,
    solve_many,
)
from .errors import DomainError, NumericalAbort, StateError
from .laguerre import PhiState, phi1, phi2, phi_update
from .spline import eval_uniform_fraction, spline_build

PADE_GAMMAS = (0.972926132, 0.744418059, 0.150843924)
PADE_BETAS = (0.004210420, 0.081312882, 0.414236605)


class GridWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PadeExpansion:
    """Coefficients of ``sqrt(1 - X) ~ 1 - sum_s b_s X / (1 - g_s X)``."""

    gammas: tuple = PADE_GAMMAS
    betas: tuple = PADE_BETAS

    def __post_init__(self):
        if len(self.gammas) != len(self.betas) or not self.gammas:
            raise DomainError("gammas and betas must be non-empty and equally long")
        if any(not (0 < g <= 1) for g in self.gammas) or any(b < 0 for b in self.betas):
            raise DomainError("expansion needs gamma in (0, 1] and beta >= 0")

    @property
    def n_terms(self):
        return len(self.gammas)

    @property
    def ratios(self):
        return tuple(b / g for b, g in zip(self.betas, self.gammas))


@dataclass(frozen=True)
class Grid2D:
    nx: int
    nz: int
    hx: float
    hz: float

    def __post_init__(self):
        if self.nx < 13 or self.nz < 2:
            raise DomainError(f"grid needs nx >= 13 and nz >= 2, got nx={self.nx}, nz={self.nz}")
        if not (self.hx > 0 and self.hz > 0):
            raise DomainError("grid spacings must be positive")
        if self.hz > self.hx:
            warnings.warn(f"hz={self.hz} exceeds hx={self.hx}; stepping is more robust with hz <= hx",
                          GridWarning, stacklevel=3)

    @property
    def x(self):
        return np.arange(self.nx) * self.hx

    @property
    def z(self):
        return np.arange(self.nz) * self.hz

    def refined(self):
        """Same x-axis, depth step halved."""
        return Grid2D(self.nx, 2 * self.nz - 1, self.hx, self.hz / 2)


@dataclass
class HarmonicSlice:
    u: np.ndarray
    psi: np.ndarray


@dataclass
class PhiVolume:
    """History accumulators for ``u`` (nz, nx) and ``psi`` (S, nz, nx)."""

    u: PhiState
    psi: PhiState

    @classmethod
    def zeros(cls, spec, nz, nx, n_branches=3):
        return cls(PhiState.zeros(spec, (nz, nx)), PhiState.zeros(spec, (n_branches, nz, nx)))

    @property
    def count(self):
        return self.u.count

    def check(self, m):
        if self.u.count != m or self.psi.count != m:
            raise StateError(f"accumulators hold {self.u.count}/{self.psi.count} terms, expected {m}")

    def update(self, u, psi, spec):
        phi_update(self.u, u, spec)
        phi_update(self.psi, psi, spec)

    def reset(self):
        self.u.reset()
        self.psi.reset()


def _check_velocity(c):
    c = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c)) or np.any(c <= 0):
        raise DomainError("velocities must be finite and positive")
    return c


def assemble_M(velocity_row, gamma_s, eta_tilde, coeffs, hx):
    """``(gamma_s c^2 / et^2) L_x - I`` as a banded matrix."""
    c = _check_velocity(velocity_row)
    if not hx > 0:
        raise DomainError("hx must be positive")
    return band_from_stencil(coeffs, gamma_s * c**2 / eta_tilde**2, hx, shift=-1.0)


def _products(ms):
    """Full product of all ``M_s`` and the products omitting each one in turn."""
    def prod(mats):
        out = mats[0]
        for b in mats[1:]:
            out = band_mul(out, b)
        return out

    full = prod(ms)
    partial = [prod([b for j, b in enumerate(ms) if j != s]) for s in range(len(ms))]
    return full, partial


def assemble_reduced_lhs(ms, velocity_row, hz, eta_tilde, pade, products=None):
    """``P diag(2c/hz + et + et sum b/g) + et sum_s (b_s/g_s) P_s``."""
    c = _check_velocity(velocity_row)
    if len(ms) != pade.n_terms or any(m.n != len(c) for m in ms):
        raise DomainError("dimension mismatch between M_s and the velocity row")
    full, partial = products or _products(ms)
    ratios = pade.ratios
    d = 2.0 * c / hz + eta_tilde + eta_tilde * sum(ratios)
    out = band_scale_columns(full, d)
    for r, p in zip(ratios, partial):
        out = band_axpy(eta_tilde * r, p, out)
    return out


def rhs_u_operator(ms, velocity_row, hz, eta_tilde, pade, products=None):
    """Banded map taking ``u_k`` to its share of the reduced right-hand side."""
    c = np.asarray(velocity_row, dtype=float)
    full, partial = products or _products(ms)
    ratios = pade.ratios
    e = 2.0 * c / hz - eta_tilde - eta_tilde * sum(ratios)
    out = band_scale_columns(full, e)
    for r, p in zip(ratios, partial):
        out = band_axpy(-eta_tilde * r, p, out)
    return out


def source_terms(u_k, phi1_u_k, phi1_u_k1, phi1_psi_half, phi2_psi_half, velocity_row, hz, eta_tilde, pade):
    """``F_u`` and the per-branch ``F_psi`` vectors of the reduced equation.

    ``F_psi`` carries ``2 / et^2`` on the history term; that is what eliminating
    ``psi`` from the block system produces.
    """
    c = np.asarray(velocity_row, dtype=float)
    ratios = pade.ratios
    f_u = ((2.0 * c / hz - eta_tilde - eta_tilde * sum(ratios)) * u_k
           - phi1_u_k1 - phi1_u_k + 2.0 * np.sum(phi1_psi_half, axis=0))
    f_psi = np.stack([-r * u_k + (2.0 / eta_tilde**2) * p2 for r, p2 in zip(ratios, phi2_psi_half)])
    return f_u, f_psi


def assemble_rhs(u_k, phi1_u_k, phi1_u_k1, phi1_psi_half, phi2_psi_half, ms, velocity_row, hz,
                 eta_tilde, pade, products=None):
    """Right side ``P F_u + et * sum_s P_s F_s`` from banded products (no inversion)."""
    from .banded import band_matvec

    full, partial = products or _products(ms)
    f_u, f_psi = source_terms(u_k, phi1_u_k, phi1_u_k1, phi1_psi_half, phi2_psi_half,
                              velocity_row, hz, eta_tilde, pade)
    out = band_matvec(full, f_u)
    for p, f in zip(partial, f_psi):
        out = out + eta_tilde * band_matvec(p, f)
    return out


def recover_psi(u_k, phi2_psi_k, m_factors, pade, eta_tilde):
    """Auxiliary fields at an integer node from ``u`` and their ``Phi_2`` history.

    ``psi_s = M_s^{-1}(-(b_s/g_s) u + Phi_2(psi_s)/et^2) - (b_s/g_s) u``.
    ``u_k`` may be ``(nx,)`` or a block ``(nx, r)`` of nodes sharing one velocity
    row, with ``phi2_psi_k`` shaped ``(S, nx)`` or ``(S, nx, r)``.
    """
    u_k = np.asarray(u_k, dtype=float)
    out = np.empty((pade.n_terms,) + u_k.shape)
    for s, (r, fac) in enumerate(zip(pade.ratios, m_factors)):
        if r == 0.0:
            out[s] = 0.0
            continue
        rhs = -r * u_k + phi2_psi_k[s] / eta_tilde**2
        out[s] = solve_many(fac, rhs) - r * u_k
    return out


class RowOperators:
    """Everything derived from one velocity row; built once, then read-only."""

    def __init__(self, c_row, eta_tilde, coeffs, hx, pade):
        self.c = _check_velocity(c_row).copy()
        self.eta_tilde = eta_tilde
        self.pade = pade
        self.hx = hx
        self.a_scale = self.c**2 / (eta_tilde**2 * hx**2)
        self.ms = [assemble_M(self.c, g, eta_tilde, coeffs, hx) for g in pade.gammas]
        self.products = _products(self.ms)
        self._m_factors = None
        self._steps = {}

    def m_factors(self):
        if self._m_factors is None:
            self._m_factors = [lu_factor(m) for m in self.ms]
        return self._m_factors

    def step(self, hz):
        """(LHS factor, banded u-to-RHS map) for depth step ``hz``."""
        if hz not in self._steps:
            lhs = assemble_reduced_lhs(self.ms, self.c, hz, self.eta_tilde, self.pade, self.products)
            rmap = rhs_u_operator(self.ms, self.c, hz, self.eta_tilde, self.pade, self.products)
            self._steps[hz] = (lu_factor(lhs), rmap)
        return self._steps[hz]


class DepthOperatorCache:
    """Row operators keyed by velocity-row content, so repeated rows share factors."""

    def __init__(self, eta_tilde, coeffs, hx, pade):
        self.eta_tilde = eta_tilde
        self.coeffs = coeffs
        self.hx = hx
        self.pade = pade
        self._rows = {}
        self.factorizations = 0

    def row(self, c_row):
        c_row = np.ascontiguousarray(c_row, dtype=float)
        key = c_row.tobytes()
        ops = self._rows.get(key)
        if ops is None:
            ops = RowOperators(c_row, self.eta_tilde, self.coeffs, self.hx, self.pade)
            self._rows[key] = ops
        return ops

    def rows_for(self, velocity):
        return [self.row(c) for c in velocity]

    def prepare(self, velocity, hz):
        """Factor everything needed for stepping ``velocity`` rows at ``hz``."""
        rows = self.rows_for(velocity)
        for ops in rows:
            if hz not in ops._steps:
                self.factorizations += 1
            ops.step(hz)
        return rows


def _poly_coefficients(pade):
    """Power-basis coefficients of ``P(x)`` and each ``P_s(x)``."""
    factors = [np.array([-1.0, g]) for g in pade.gammas]
    full = np.array([1.0])
    for f in factors:
        full = npoly.polymul(full, f)
    partial = []
    for s in range(len(factors)):
        p = np.array([1.0])
        for j, f in enumerate(factors):
            if j != s:
                p = npoly.polymul(p, f)
        partial.append(np.pad(p, (0, len(full) - len(p))))
    return full, np.array(partial)


def history_source(phi1_u, phi1_psi_half, phi2_psi_half, a_scale, coeffs, eta_tilde, pade):
    """History part of the right side at every step, shape (K-1, nx).

    ``a_scale`` (K-1, nx) holds ``c^2/(et^2 hx^2)`` of the row used by each
    step; the matrix polynomial in ``A`` is applied by Horner's rule.
    """
    g = -phi1_u[:-1] - phi1_u[1:] + 2.0 * np.sum(phi1_psi_half, axis=0)
    h = (2.0 / eta_tilde**2) * phi2_psi_half
    full, partial = _poly_coefficients(pade)
    weights = coeffs.weights()
    acc = None
    for p in range(len(full) - 1, -1, -1):
        term = full[p] * g + eta_tilde * np.tensordot(partial[:, p], h, axes=1)
        if acc is None:
            acc = term
        else:
            acc = a_scale * ndimage.correlate1d(acc, weights, axis=-1, mode="constant") + term
    return acc


def sweep(u0, steps, source):
    """Crank-Nicolson march ``u_{k+1} = LHS_k^{-1}(R_k u_k + S_k)``.

    ``steps`` lists ``(factor, rmap)`` per step and ``source`` is (K-1, nx).
    """
    nsteps = len(steps)
    out = np.empty((nsteps + 1, len(u0)))
    out[0] = u0
    u = np.asarray(u0, dtype=float)
    for k, (fac, rmap) in enumerate(steps):
        if rmap.n > rmap.kl + rmap.ku:
            rhs = blas.dgbmv(rmap.n, rmap.n, rmap.kl, rmap.ku, 1.0, rmap.ab, u, beta=1.0, y=source[k].copy())
        else:
            rhs = band_matvec(rmap, u) + source[k]
        u, info = lapack.dgbtrs(fac.lu, fac.kl, fac.ku, rhs, fac.piv)
        out[k + 1] = u
    return out


def recover_psi_volume(u, phi2_psi, rows, pade, eta_tilde, executor=None):
    """Recover ``psi`` at every integer node; nodes sharing a row are solved together."""
    groups = {}
    for k, ops in enumerate(rows):
        groups.setdefault(id(ops), (ops, []))[1].append(k)
    out = np.empty((pade.n_terms,) + u.shape)

    def branch(s):
        r = pade.ratios[s]
        for ops, ks in groups.values():
            fac = ops.m_factors()[s]
            if r == 0.0:
                out[s, ks] = 0.0
                continue
            rhs = (-r * u[ks] + phi2_psi[s, ks] / eta_tilde**2).T
            out[s, ks] = solve_many(fac, rhs).T - r * u[ks]

    if executor is None:
        for s in range(pade.n_terms):
            branch(s)
    else:
        list(executor.map(branch, range(pade.n_terms)))
    return out


HALF_NODE_RULES = ("linear", "spline")


def half_node_phi(values, hz, rule="linear"):
    """Midpoint values of integer-node fields (K, ...) along depth.

    ``linear`` averages neighbours.  Because the history operators are linear,
    this reproduces exactly the history of the midpoint auxiliary field solved
    by the Crank-Nicolson block system.  ``spline`` uses a natural cubic spline.
    """
    if rule == "linear":
        return 0.5 * (values[:-1] + values[1:])
    if rule == "spline":
        if values.shape[0] < 3:
            # a natural spline through two knots is the chord
            return 0.5 * (values[:-1] + values[1:])
        z = np.arange(values.shape[0]) * hz
        return eval_uniform_fraction(spline_build(z, values), 0.5)
    raise DomainError(f"unknown half-node rule {rule!r}")


def check_amplitude(u, limit, m, mesh=None):
    """Raise ``NumericalAbort`` at the first depth exceeding ``limit`` or non-finite."""
    peak = np.max(np.abs(u), axis=-1)
    bad = ~np.isfinite(peak) | (peak > limit)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise NumericalAbort(
            f"amplitude {peak[k]:.3e} exceeds monitor limit {limit:.3e}", harmonic=m, depth=k, mesh=mesh
        )


@dataclass
class MonitorConfig:
    factor: float = 10.0
    reference: float = 0.0

    def limit(self, surface_u):
        ref = max(self.reference, float(np.max(np.abs(surface_u))) if np.size(surface_u) else 0.0)
        self.reference = ref
        return self.factor * ref


def psi_half_history(state, hz, rule="linear"):
    """``Phi_1`` and ``Phi_2`` of ``psi`` at depth midpoints, each (S, K-1, nx)."""
    s = state.psi.weighted_sum.shape[0]
    both = np.concatenate([phi1(state.psi), phi2(state.psi)])
    half = half_node_phi(both.transpose(1, 0, 2), hz, rule).transpose(1, 0, 2)
    return half[:s], half[s:]


def march(surface_u, rows, hz, phi1_u, phi1_psi_half, phi2_psi_half, cache):
    """Depth sweep for one harmonic given all history terms; returns (K, nx)."""
    a_scale = np.stack([ops.a_scale for ops in rows[:-1]])
    source = history_source(phi1_u, phi1_psi_half, phi2_psi_half, a_scale, cache.coeffs,
                            cache.eta_tilde, cache.pade)
    return sweep(np.asarray(surface_u, dtype=float), [ops.step(hz) for ops in rows[:-1]], source)


def step_harmonic(m, surface_u, state, cache, grid, velocity, spec, monitor=None, executor=None,
                  rows=None, half_rule="linear", mesh=None):
    """Continue harmonic ``m`` through all depths and fold it into ``state``.

    Returns ``(u, psi)`` with shapes (nz, nx) and (S, nz, nx).
    """
    state.check(m)
    if rows is None:
        rows = cache.prepare(velocity, grid.hz)
    h1, h2 = psi_half_history(state, grid.hz, half_rule)
    u = march(surface_u, rows, grid.hz, phi1(state.u), h1, h2, cache)
    if monitor is not None:
        check_amplitude(u, monitor.limit(surface_u), m, mesh)
    psi = recover_psi_volume(u, phi2(state.psi), rows, cache.pade, cache.eta_tilde, executor)
    state.update(u, psi, spec)
    return u, psi


def block_system_step(u_k, phi1_u_k, phi1_u_k1, phi1_psi_half, phi2_psi_half, velocity_row, coeffs,
                      hx, hz, eta_tilde, pade):
    """One Crank-Nicolson step solved from the full (S+1)-block system, densely.

    Independent reference for the reduced path; returns ``(u_{k+1}, psi_{k+1/2})``.
    """
    from .banded import band_from_stencil as _bfs

    c = np.asarray(velocity_row, dtype=float)
    n = len(c)
    s_count = pade.n_terms
    lap = _bfs(coeffs, np.ones(n), hx).to_dense()
    dl = np.diag(c**2) @ lap
    eye = np.eye(n)
    big = np.zeros(((s_count + 1) * n, (s_count + 1) * n))
    rhs = np.zeros((s_count + 1) * n)
    last = slice(s_count * n, (s_count + 1) * n)
    for s, (g, b) in enumerate(zip(pade.gammas, pade.betas)):
        blk = slice(s * n, (s + 1) * n)
        big[blk, blk] = g * dl - eta_tilde**2 * eye
        big[blk, last] = 0.5 * b * dl
        big[last, blk] = -2.0 * eta_tilde * eye
        rhs[blk] = -0.5 * b * dl @ u_k + phi2_psi_half[s]
    big[last, last] = np.diag(2.0 * c / hz + eta_tilde)
    rhs[last] = ((2.0 * c / hz - eta_tilde) * u_k - (phi1_u_k1 + phi1_u_k)
                 + 2.0 * np.sum(phi1_psi_half, axis=0))
    sol = np.linalg.solve(big, rhs)
    return sol[last], sol[: s_count * n].reshape(s_count, n)
