"""Fourth-order depth accuracy from steps ``hz`` and ``hz/2`` (Richardson)."""

from dataclasses import dataclass

import numpy as np

from .continuation import (
    Grid2D,
    check_amplitude,
    march,
    psi_half_history,
    recover_psi_volume,
    step_harmonic,
)
from .errors import DomainError
from .laguerre import phi1, phi2
from .spline import SplineCurve, eval_uniform_fraction, spline_build, spline_eval

__all__ = [
    "DualMesh",
    "SplineCurve",
    "spline_build",
    "spline_eval",
    "richardson_combine",
    "global_correction_sweep",
    "fine_rows",
    "HISTORY_MODES",
]

HISTORY_MODES = ("independent", "corrected")


@dataclass(frozen=True)
class DualMesh:
    coarse: Grid2D

    @property
    def fine(self):
        return self.coarse.refined()

    def coarse_nodes_in_fine(self):
        return np.arange(0, self.fine.nz, 2)


def fine_velocity(velocity):
    """Velocity rows for the refined mesh: fine node ``j`` uses coarse row ``j // 2``."""
    v = np.asarray(velocity)
    return np.repeat(v, 2, axis=0)[: 2 * v.shape[0] - 1]


def fine_rows(cache, velocity):
    return cache.rows_for(fine_velocity(velocity))


def richardson_combine(u_coarse, u_fine):
    """``(4 fine - coarse) / 3`` at the coarse nodes.

    ``u_fine`` may be the full refined volume (2K-1 rows) or already restricted
    to the coarse nodes (K rows).
    """
    u_coarse = np.asarray(u_coarse, dtype=float)
    u_fine = np.asarray(u_fine, dtype=float)
    k = u_coarse.shape[0]
    if u_fine.shape[0] == 2 * k - 1:
        u_fine = u_fine[::2]
    if u_fine.shape != u_coarse.shape:
        raise DomainError(f"shape mismatch: coarse {u_coarse.shape}, fine {u_fine.shape}")
    return (4.0 * u_fine - u_coarse) / 3.0


def interleave(even, odd):
    """Merge (K, ...) and (K-1, ...) arrays into (2K-1, ...) alternating rows."""
    out = np.empty((even.shape[0] + odd.shape[0],) + even.shape[1:])
    out[0::2] = even
    out[1::2] = odd
    return out


def transfer_to_fine(phi1_u, phi1_psi, phi2_psi, hz, end_second_derivs=None):
    """Spline coarse-node history terms onto the refined mesh.

    Returns ``Phi_1(u)`` at every fine node and ``Phi_1/Phi_2(psi)`` at the
    fine midpoints (coarse quarter points).
    """
    z = np.arange(phi1_u.shape[0]) * hz
    ends = end_second_derivs or (0.0, 0.0)
    cu = spline_build(z, phi1_u, ends)
    fine_u = interleave(phi1_u, eval_uniform_fraction(cu, 0.5))
    s = phi1_psi.shape[0]
    both = np.concatenate([phi1_psi, phi2_psi]).transpose(1, 0, 2)
    cp = spline_build(z, both, ends)
    q1 = eval_uniform_fraction(cp, 0.25)
    q3 = eval_uniform_fraction(cp, 0.75)
    half = interleave(q1, q3[:-1])
    half = np.concatenate([half, q3[-1:]]).transpose(1, 0, 2)
    return fine_u, half[:s], half[s:]


def global_correction_sweep(m, surface_u, dual, state, cache, velocity, spec, monitor=None,
                            executor=None, correction=True, history="independent",
                            fine_state=None, half_rule="linear", rows=None, rows_fine=None):
    """One harmonic of the fourth-order scheme.

    ``history="independent"`` keeps separate accumulators on both meshes, each
    fed by its own solution; the corrected field is a per-harmonic output.
    ``history="corrected"`` keeps accumulators on the coarse mesh only, fed by
    the corrected field, and splines them onto the refined mesh.

    Returns ``(corrected_u, psi, fine_u)``; ``fine_u`` is None when correction
    is disabled.  With ``correction=False`` this is plain stepping on the
    coarse mesh.
    """
    coarse = dual.coarse
    if rows is None:
        rows = cache.prepare(velocity, coarse.hz)
    if not correction:
        u, psi = step_harmonic(m, surface_u, state, cache, coarse, velocity, spec, monitor,
                               executor, rows, half_rule, mesh="coarse")
        return u, psi, None
    fine = dual.fine
    if rows_fine is None:
        rows_fine = cache.prepare(fine_velocity(velocity), fine.hz)
    if history == "independent":
        if fine_state is None:
            raise DomainError("independent history needs a fine-mesh accumulator state")

        def run_coarse():
            return step_harmonic(m, surface_u, state, cache, coarse, velocity, spec, monitor,
                                 None, rows, half_rule, mesh="coarse")

        def run_fine():
            return step_harmonic(m, surface_u, fine_state, cache, fine, None, spec, monitor,
                                 None, rows_fine, half_rule, mesh="fine")

        if executor is not None:
            fc = executor.submit(run_coarse)
            ff = executor.submit(run_fine)
            (u_c, psi_c), (u_f, _) = fc.result(), ff.result()
        else:
            u_c, psi_c = run_coarse()
            u_f, _ = run_fine()
        return richardson_combine(u_c, u_f), psi_c, u_f
    if history != "corrected":
        raise DomainError(f"unknown history mode {history!r}")
    state.check(m)
    phi1_u = phi1(state.u)
    p1 = phi1(state.psi)
    p2 = phi2(state.psi)
    fu, f1, f2 = transfer_to_fine(phi1_u, p1, p2, coarse.hz)
    h1, h2 = psi_half_history(state, coarse.hz, half_rule)
    u_c = march(surface_u, rows, coarse.hz, phi1_u, h1, h2, cache)
    u_f = march(surface_u, rows_fine, fine.hz, fu, f1, f2, cache)
    u = richardson_combine(u_c, u_f)
    if monitor is not None:
        lim = monitor.limit(surface_u)
        check_amplitude(u_c, lim, m, "coarse")
        check_amplitude(u_f, lim, m, "fine")
    psi = recover_psi_volume(u, p2, rows, cache.pade, cache.eta_tilde, executor)
    state.update(u, psi, spec)
    return u, psi, u_f
