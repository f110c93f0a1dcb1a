import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_genlaguerre, gammaln, roots_genlaguerre

from lfd.errors import DomainError, StateError
from lfd.laguerre import (
    CoefficientSeries,
    LaguerreSpec,
    PhiState,
    analyze,
    choose_laguerre_params,
    laguerre_function_row,
    phi1,
    phi2,
    phi_direct,
    phi_update,
    shifted_wavelet_error,
    synthesis_weights,
    synthesize,
)
from lfd.wavelet import WaveletSpec, wavelet_eval


def _scipy_laguerre_function(m, alpha, x):
    norm = math.exp(0.5 * (gammaln(m + 1.0) - gammaln(m + alpha + 1.0)))
    return norm * x ** (0.5 * alpha) * np.exp(-0.5 * x) * eval_genlaguerre(m, alpha, x)


@pytest.mark.parametrize("alpha", [0, 1, 3])
def test_function_row_matches_scipy(alpha):
    spec = LaguerreSpec(alpha, 2.0, 40, 10.0)
    t = np.linspace(0.0, 20.0, 57)
    row = laguerre_function_row(spec, t, 39)
    for m in (0, 1, 7, 39):
        ref = _scipy_laguerre_function(m, alpha, spec.eta * t)
        assert np.allclose(row[m], ref, rtol=1e-10, atol=1e-13)


@pytest.mark.parametrize("alpha", [0, 2])
def test_functions_orthonormal_under_gauss_laguerre(alpha):
    # l_m l_n = x^a e^{-x} q_m q_n, integrated exactly by generalized Gauss-Laguerre
    n = 12
    spec = LaguerreSpec(alpha, 1.0, n, 1.0)
    x, w = roots_genlaguerre(40, alpha)
    rows = laguerre_function_row(spec, x, n - 1) * np.exp(0.5 * x) * x ** (-0.5 * alpha)
    gram = (rows * w) @ rows.T
    assert np.allclose(gram, np.eye(n), atol=1e-12)


def test_high_order_functions_stay_finite():
    spec = LaguerreSpec(0, 800.0, 4000, 12.0)
    row = laguerre_function_row(spec, np.array([0.0, 1.0, 12.0]), 3999)
    assert np.all(np.isfinite(row))
    assert np.all(np.abs(row) <= 1.0 + 1e-12)


def test_analyze_exponential_closed_form():
    # int_0^inf e^{-s x} L_m(x) dx = (s-1)^m / s^(m+1)
    eta, a = 50.0, 30.0
    spec = LaguerreSpec(0, eta, 30, 2.0)
    dt = 2e-5
    t = np.arange(0.0, 2.0 + dt / 2, dt)
    coeffs = analyze(np.exp(-a * t), dt, spec).values
    s = a / eta + 0.5
    m = np.arange(30)
    expected = (s - 1.0) ** m / s ** (m + 1) / math.sqrt(eta)
    assert np.allclose(coeffs, expected, rtol=0, atol=1e-9)


def test_round_trip_small():
    w = WaveletSpec()
    spec = LaguerreSpec(0, 800.0, 600, 1.0)
    dt = 1e-4
    t = np.arange(0.0, 1.0 + dt / 2, dt)
    g = wavelet_eval(w, t)
    rec = synthesize(analyze(g, dt, spec), t)
    assert np.linalg.norm(rec - g) / np.linalg.norm(g) < 1e-3


def test_analyze_is_linear_and_columnwise():
    spec = LaguerreSpec(0, 300.0, 80, 1.0)
    dt = 1e-3
    rng = np.random.default_rng(0)
    a = rng.normal(size=(1001, 3))
    b = rng.normal(size=(1001, 3))
    ca, cb = analyze(a, dt, spec).values, analyze(b, dt, spec).values
    assert np.allclose(analyze(2 * a - b, dt, spec).values, 2 * ca - cb, atol=1e-10)
    assert np.allclose(analyze(a[:, 1], dt, spec).values, ca[:, 1])


def test_synthesis_weights_agree_with_synthesize():
    spec = LaguerreSpec(0, 200.0, 50, 1.0)
    vals = np.random.default_rng(1).normal(size=50)
    t = 0.37
    assert synthesis_weights(spec, t) @ vals == pytest.approx(
        float(synthesize(CoefficientSeries(spec, vals), t)), rel=1e-12)


def _pulse_and_derivative(t, w):
    ph = 2 * np.pi * w.f0 * (t - w.t0)
    env = np.exp(-(ph**2) / w.g**2)
    return env * np.sin(ph), 2 * np.pi * w.f0 * env * (np.cos(ph) - 2 * ph / w.g**2 * np.sin(ph))


def test_first_derivative_identity():
    # transform of g' equals (eta/2) g_m + Phi_1 for a signal vanishing at t = 0
    w = WaveletSpec()
    spec = LaguerreSpec(0, 800.0, 200, 1.0)
    dt = 1e-5
    t = np.arange(0.0, 1.0 + dt / 2, dt)
    g, dg = _pulse_and_derivative(t, w)
    G = analyze(g, dt, spec).values
    D = analyze(dg, dt, spec).values
    state = PhiState.zeros(spec)
    pred = np.empty_like(G)
    for m in range(spec.n_terms):
        pred[m] = spec.eta_tilde * G[m] + phi1(state)
        phi_update(state, G[m], spec)
    assert np.abs(D - pred).max() < 1e-10 * np.abs(D).max()


def test_second_derivative_identity():
    w = WaveletSpec()
    spec = LaguerreSpec(0, 800.0, 200, 1.0)
    dt = 1e-5
    t = np.arange(0.0, 1.0 + dt / 2, dt)
    g, dg = _pulse_and_derivative(t, w)
    G = analyze(g, dt, spec).values
    D2 = analyze(np.gradient(dg, dt), dt, spec).values
    state = PhiState.zeros(spec)
    pred = np.empty_like(G)
    for m in range(spec.n_terms):
        pred[m] = spec.eta_tilde**2 * G[m] + phi2(state)
        phi_update(state, G[m], spec)
    assert np.abs(D2 - pred).max() < 1e-5 * np.abs(D2).max()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40), st.integers(0, 4),
       st.floats(0.1, 1e3))
def test_running_sums_match_direct_sums(values, alpha, eta):
    spec = LaguerreSpec(alpha, eta, len(values) + 1, 1.0)
    state = PhiState.zeros(spec)
    for v in values:
        phi_update(state, v, spec)
    scale = eta**2 * (1 + max(abs(v) for v in values)) * len(values) ** (alpha + 2)
    assert phi1(state) == pytest.approx(phi_direct(values, alpha, eta, 1), abs=1e-9 * scale)
    assert phi2(state) == pytest.approx(phi_direct(values, alpha, eta, 2), abs=1e-9 * scale)


def test_state_overflow_and_nonfinite():
    spec = LaguerreSpec(0, 1.0, 2, 1.0)
    state = PhiState.zeros(spec)
    with pytest.raises(StateError):
        phi_update(state, np.nan, spec)
    phi_update(state, 1.0, spec)
    phi_update(state, 1.0, spec)
    with pytest.raises(StateError):
        phi_update(state, 1.0, spec)


@pytest.mark.parametrize("kw", [dict(alpha=-1), dict(eta=0.0), dict(n_terms=0), dict(horizon=-1.0)])
def test_spec_validation(kw):
    args = dict(alpha=0, eta=1.0, n_terms=4, horizon=1.0)
    args.update(kw)
    with pytest.raises(DomainError):
        LaguerreSpec(**args)


def test_analyze_rejects_bad_input():
    spec = LaguerreSpec(0, 1.0, 4, 1.0)
    with pytest.raises(DomainError):
        analyze(np.array([]), 0.1, spec)
    with pytest.raises(DomainError):
        analyze(np.array([1.0, np.inf]), 0.1, spec)
    with pytest.raises(DomainError):
        synthesize(CoefficientSeries(spec, np.zeros(4)), -1.0)


def test_undersampled_analysis_warns():
    spec = LaguerreSpec(0, 800.0, 2000, 3.0)
    res = analyze(np.ones(31), 0.1, spec)
    assert res.warnings


def test_parameter_search_short_record():
    spec = choose_laguerre_params(0.75, WaveletSpec(), epsilon=1e-3)
    assert spec.alpha == 0
    assert shifted_wavelet_error(spec) < 1e-3


def test_parameter_search_reports_failure():
    with pytest.raises(DomainError, match="best error"):
        choose_laguerre_params(3.0, WaveletSpec(), epsilon=1e-3, n_min=64, n_max=64, eta_points=5)
