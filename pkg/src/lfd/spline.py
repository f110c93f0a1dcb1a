"""Cubic interpolating splines in depth, batched over trailing columns."""

from dataclasses import dataclass

import numpy as np

from .banded import BandedMatrix, lu_factor, solve_many
from .errors import DomainError


@dataclass
class SplineCurve:
    """Knots ``z`` (K,), values ``y`` (K, ...) and second derivatives ``m`` (K, ...).

    ``ends`` records the end second derivatives the spline was built with.
    """

    z: np.ndarray
    y: np.ndarray
    m: np.ndarray
    ends: tuple = (0.0, 0.0)


def spline_build(z_knots, values, end_second_derivs=(0.0, 0.0)):
    """Cubic spline through ``values`` with prescribed end second derivatives.

    The default ``(0, 0)`` gives the natural spline.  End values may be arrays
    matching the trailing shape of ``values``.
    """
    z = np.asarray(z_knots, dtype=float)
    y = np.asarray(values, dtype=float)
    k = len(z)
    if k < 3 or y.shape[0] != k:
        raise DomainError("spline needs at least three knots and one value per knot")
    h = np.diff(z)
    if np.any(h <= 0):
        raise DomainError("spline knots must be strictly increasing")
    tail = y.shape[1:]
    flat = y.reshape(k, -1)
    m = np.empty_like(flat)
    m[0] = np.broadcast_to(np.asarray(end_second_derivs[0], dtype=float).reshape(-1), flat.shape[1:])
    m[-1] = np.broadcast_to(np.asarray(end_second_derivs[1], dtype=float).reshape(-1), flat.shape[1:])
    slope = np.diff(flat, axis=0) / h[:, None]
    rhs = 6.0 * (slope[1:] - slope[:-1])
    rhs[0] -= h[0] * m[0]
    rhs[-1] -= h[-1] * m[-1]
    inner = k - 2
    tri = BandedMatrix.zeros(inner, 1, 1)
    tri.set_diagonal(0, 2.0 * (h[:-1] + h[1:]))
    if inner > 1:
        tri.set_diagonal(1, h[1:-1])
        tri.set_diagonal(-1, h[1:-1])
    m[1:-1] = solve_many(lu_factor(tri), rhs)
    return SplineCurve(z, y, m.reshape((k,) + tail), tuple(end_second_derivs))


def spline_eval(curve, z_query):
    """Evaluate at ``z_query`` (within the knot range); returns (Q, ...)."""
    zq = np.asarray(z_query, dtype=float)
    z = curve.z
    if zq.size and (zq.min() < z[0] - 1e-12 * abs(z[-1] - z[0]) or zq.max() > z[-1] + 1e-12 * abs(z[-1] - z[0])):
        raise DomainError("spline query outside the knot range")
    i = np.clip(np.searchsorted(z, zq, side="right") - 1, 0, len(z) - 2)
    h = z[i + 1] - z[i]
    t = (zq - z[i]) / h
    shape = (-1,) + (1,) * (curve.y.ndim - 1)
    t = t.reshape(shape)
    h = h.reshape(shape)
    s = 1.0 - t
    return (s * curve.y[i] + t * curve.y[i + 1]
            + h**2 / 6.0 * ((s**3 - s) * curve.m[i] + (t**3 - t) * curve.m[i + 1]))


def eval_uniform_fraction(curve, frac):
    """Values at ``z_k + frac * h`` for every interval ``k`` of a uniform spline."""
    h = curve.z[1] - curve.z[0]
    t = float(frac)
    s = 1.0 - t
    return (s * curve.y[:-1] + t * curve.y[1:]
            + h**2 / 6.0 * ((s**3 - s) * curve.m[:-1] + (t**3 - t) * curve.m[1:]))


def one_sided_second_derivs(z, values):
    """Third-order one-sided estimates of ``y''`` at both ends (uniform knots)."""
    y = np.asarray(values, dtype=float)
    if len(z) < 4:
        return np.zeros(y.shape[1:]), np.zeros(y.shape[1:])
    h = z[1] - z[0]
    lo = (2 * y[0] - 5 * y[1] + 4 * y[2] - y[3]) / h**2
    hi = (2 * y[-1] - 5 * y[-2] + 4 * y[-3] - y[-4]) / h**2
    return lo, hi
