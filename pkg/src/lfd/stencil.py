"""Symmetric second-derivative stencils and their Fourier symbols."""

from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np
from scipy import ndimage

from .errors import DomainError, LFDError

DRP_PAPER = (
    -3.12513824,
    1.84108651,
    -0.35706478,
    0.10185626,
    -0.02924772,
    0.00696837,
    -0.00102952,
)

BOUNDARY_RULES = ("zero", "periodic")


@dataclass(frozen=True)
class StencilCoefficients:
    """Weights of ``(a0 f_i + sum_j a_j (f_{i-j} + f_{i+j})) / h^2``."""

    a0: float
    wings: tuple
    provenance: str

    @property
    def radius(self):
        return len(self.wings)

    def zero_sum(self):
        """``a0 + 2 sum a_j``; zero when constants are annihilated."""
        return self.a0 + 2.0 * sum(self.wings)

    def second_moment(self):
        """``sum j^2 a_j``; one when ``x^2`` maps to 2 exactly."""
        return sum(j * j * a for j, a in enumerate(self.wings, start=1))

    def weights(self):
        """Full symmetric weight vector of length ``2*radius + 1``."""
        w = np.asarray(self.wings, dtype=float)
        return np.concatenate([w[::-1], [self.a0], w])


def drp_paper_coefficients():
    """The 13-point dispersion-relation-preserving table used by the solver."""
    return StencilCoefficients(DRP_PAPER[0], DRP_PAPER[1:], "drp_paper")


def taylor_coefficients(radius):
    """Central weights of order ``2*radius`` from the exact moment system."""
    if not 1 <= radius <= 8:
        raise DomainError(f"Taylor stencil radius must be in [1, 8], got {radius}")
    n = radius
    # sum_j a_j j^(2p) = [p == 1] for p = 1..n, solved over the rationals
    rows = [[Fraction(j) ** (2 * p) for j in range(1, n + 1)] + [Fraction(int(p == 1))]
            for p in range(1, n + 1)]
    for col in range(n):
        piv = next(r for r in range(col, n) if rows[r][col] != 0)
        rows[col], rows[piv] = rows[piv], rows[col]
        for r in range(n):
            if r != col and rows[r][col] != 0:
                f = rows[r][col] / rows[col][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[col])]
    wings = [rows[i][n] / rows[i][i] for i in range(n)]
    a0 = -2 * sum(wings)
    return StencilCoefficients(float(a0), tuple(float(w) for w in wings), "taylor")


def symbol(coeffs, kh):
    """Fourier symbol ``a0 + 2 sum a_j cos(j kh)`` (multiply by 1/h^2 for units)."""
    kh = np.asarray(kh, dtype=float)
    out = np.full(kh.shape, coeffs.a0)
    for j, a in enumerate(coeffs.wings, start=1):
        out = out + 2.0 * a * np.cos(j * kh)
    return float(out) if out.ndim == 0 else out


def relative_symbol_error(coeffs, kh):
    """``|symbol + kh^2| / kh^2``, defined as 0 at kh = 0."""
    kh = np.asarray(kh, dtype=float)
    s = np.asarray(symbol(coeffs, kh))
    exact = -(kh**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.where(kh == 0, 0.0, np.abs(s - exact) / np.abs(exact))
    return err


def optimize_drp(radius, k_cut=2.6, weight=None, n_quad=1024):
    """Least-squares stencil over wavenumbers ``[0, k_cut]`` (in units of 1/h).

    Minimizes the weighted squared symbol error subject to exact annihilation
    of constants and exact reproduction of ``x^2``.  ``weight`` is a callable of
    ``kh`` (default 1).  The normal equations are solved in extended precision
    because they become nearly singular as ``k_cut`` shrinks.
    """
    if not 0 < k_cut < np.pi:
        raise DomainError(f"k_cut must lie in (0, pi), got {k_cut}")
    if radius < 1:
        raise DomainError("radius must be >= 1")
    n_quad += n_quad % 2
    with mpmath.workdps(90):
        kc = mpmath.mpf(k_cut)
        step = kc / n_quad
        nodes = [step * i for i in range(n_quad + 1)]
        simpson = [1 if i in (0, n_quad) else (4 if i % 2 else 2) for i in range(n_quad + 1)]
        if weight is None:
            wvals = [mpmath.mpf(1)] * len(nodes)
        else:
            wvals = [mpmath.mpf(float(weight(float(k)))) for k in nodes]
        # with a0 eliminated, the symbol is sum_j a_j * 2 (cos(j k) - 1)
        size = radius + 1
        normal = mpmath.zeros(size, size)
        rhs = mpmath.zeros(size, 1)
        for k, s, w in zip(nodes, simpson, wvals):
            wt = s * w * step / 3
            basis = [2 * (mpmath.cos(j * k) - 1) for j in range(1, radius + 1)]
            target = -k * k
            for i in range(radius):
                rhs[i] += wt * basis[i] * target
                for j in range(radius):
                    normal[i, j] += wt * basis[i] * basis[j]
        for j in range(radius):
            normal[radius, j] = (j + 1) ** 2
            normal[j, radius] = (j + 1) ** 2
        rhs[radius] = 1
        try:
            sol = mpmath.lu_solve(normal, rhs)
        except ZeroDivisionError as exc:
            raise LFDError("singular normal equations in DRP optimization") from exc
        wings = [sol[i] for i in range(radius)]
        a0 = -2 * mpmath.fsum(wings)
        return StencilCoefficients(float(a0), tuple(float(w) for w in wings), "optimized")


def weighted_symbol_error(coeffs, k_cut, weight=None, n_quad=2048):
    """Value of the optimization functional for ``coeffs`` (Simpson quadrature)."""
    n_quad += n_quad % 2
    k = np.linspace(0.0, k_cut, n_quad + 1)
    w = np.ones_like(k) if weight is None else np.asarray(weight(k), dtype=float)
    err = (np.asarray(symbol(coeffs, k)) + k**2) ** 2 * w
    sw = np.ones(n_quad + 1)
    sw[1:-1:2] = 4.0
    sw[2:-1:2] = 2.0
    return float(np.sum(sw * err) * (k_cut / n_quad) / 3.0)


def apply_operator(field, coeffs, h, boundary="zero"):
    """Second derivative along the last axis of ``field``.

    ``boundary="zero"`` reads samples beyond either edge as 0; ``"periodic"``
    wraps around.
    """
    if not h > 0:
        raise DomainError(f"grid spacing must be positive, got {h}")
    if boundary not in BOUNDARY_RULES:
        raise DomainError(f"unknown boundary rule {boundary!r}")
    f = np.asarray(field, dtype=float)
    mode = "constant" if boundary == "zero" else "wrap"
    return ndimage.correlate1d(f, coeffs.weights() / h**2, axis=-1, mode=mode, cval=0.0)


def by_name(name):
    """Resolve a config value: ``drp`` / ``drp_paper`` or ``taylorN``."""
    key = name.strip().lower()
    if key in ("drp", "drp_paper"):
        return drp_paper_coefficients()
    if key.startswith("taylor") and key[6:].isdigit():
        return taylor_coefficients(int(key[6:]))
    raise DomainError(f"unknown stencil {name!r}; expected drp_paper or taylor1..taylor8")
