import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import CubicSpline

from lfd.errors import DomainError
from lfd.spline import eval_uniform_fraction, one_sided_second_derivs, spline_build, spline_eval


def test_linear_data_reproduced():
    z = np.linspace(0.0, 10.0, 7)
    c = spline_build(z, 3.0 * z - 1.0)
    q = np.linspace(0.0, 10.0, 101)
    assert np.abs(spline_eval(c, q) - (3.0 * q - 1.0)).max() < 1e-12


def test_matches_scipy_natural_and_clamped():
    rng = np.random.default_rng(0)
    z = np.sort(rng.uniform(0, 5, 12))
    y = rng.normal(size=(12, 3))
    q = np.linspace(z[0], z[-1], 77)
    nat = spline_build(z, y)
    ref = CubicSpline(z, y, bc_type="natural")
    assert np.allclose(spline_eval(nat, q), ref(q), atol=1e-12)
    ends = (np.array([1.0, -2.0, 0.5]), np.array([0.0, 3.0, -1.0]))
    cl = spline_build(z, y, ends)
    ref = CubicSpline(z, y, bc_type=((2, ends[0]), (2, ends[1])))
    assert np.allclose(spline_eval(cl, q), ref(q), atol=1e-12)
    assert cl.ends[0] is ends[0]


def test_fourth_order_convergence():
    # clamped with exact end curvature removes the boundary layer
    def err(k):
        z = np.linspace(0.0, np.pi, k)
        c = spline_build(z, np.sin(z), (-np.sin(z[0]), -np.sin(z[-1])))
        q = np.linspace(0.0, np.pi, 2001)
        return np.abs(spline_eval(c, q) - np.sin(q)).max()

    assert err(33) / err(65) == pytest.approx(16.0, rel=0.1)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 30), st.integers(0, 2**31))
def test_knots_exact_and_c2(k, seed):
    rng = np.random.default_rng(seed)
    z = np.cumsum(rng.uniform(0.1, 2.0, k))
    y = rng.normal(size=k)
    c = spline_build(z, y)
    assert np.allclose(spline_eval(c, z), y, atol=1e-12)
    # one-sided slopes agree at interior knots; curvature is shared by construction
    h = np.diff(z)
    m = c.m
    left = np.diff(y)[:-1] / h[:-1] + h[:-1] / 6 * (2 * m[1:-1] + m[:-2])
    right = np.diff(y)[1:] / h[1:] - h[1:] / 6 * (2 * m[1:-1] + m[2:])
    assert np.allclose(left, right, atol=1e-10 * (1 + np.abs(left).max()))


@settings(max_examples=30, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(0.0, 1.0))
def test_constants_preserved(value, frac):
    z = np.arange(9) * 0.5
    c = spline_build(z, np.full((9, 2), value))
    assert np.allclose(eval_uniform_fraction(c, frac), value, rtol=0, atol=1e-12 * (1 + abs(value)))


def test_uniform_fraction_agrees_with_eval():
    z = np.arange(81) * 0.025
    c = spline_build(z, np.cos(3 * z))
    mid = eval_uniform_fraction(c, 0.5)
    assert np.allclose(mid, spline_eval(c, z[:-1] + 0.0125))
    # away from the natural ends, half-node values match the smooth field
    assert np.abs(mid - np.cos(3 * (z[:-1] + 0.0125)))[16:-16].max() < 1e-6


def test_midpoint_of_linear_segment():
    c = spline_build(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 2.0]))
    assert spline_eval(c, [0.5])[0] == pytest.approx(0.5)


def test_one_sided_curvature_estimates():
    z = np.linspace(0.0, 1.0, 41)
    lo, hi = one_sided_second_derivs(z, np.exp(z))
    assert lo == pytest.approx(1.0, abs=2e-3)
    assert hi == pytest.approx(np.e, abs=5e-3)


def test_errors():
    with pytest.raises(DomainError):
        spline_build(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
    with pytest.raises(DomainError):
        spline_build(np.array([0.0, 2.0, 1.0]), np.zeros(3))
    c = spline_build(np.array([0.0, 1.0, 2.0]), np.zeros(3))
    with pytest.raises(DomainError):
        spline_eval(c, [2.5])
