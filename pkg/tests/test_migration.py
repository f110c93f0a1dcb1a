import csv

import numpy as np
import pytest
from scipy.signal import hilbert

from lfd.config import parse_config
from lfd.errors import ConfigError, DomainError
from lfd.laguerre import CoefficientSeries, LaguerreSpec
from lfd.migration import (
    ProgressLog,
    pad_columns,
    run_impulse,
    run_migration,
    run_snapshot,
    trace_coefficients,
    trim_columns,
    wavefront_radius,
)
from lfd.model_io import SeismicSection, VelocityModel, prepare_exploding_reflector
from lfd.wavelet import WaveletSpec, wavelet_eval

V, DEPTH = 2000.0, 120.0
NX, NZ, HX, HZ = 31, 91, 5.0, 2.0


def _flat_reflector_section(amplitude=1.0, nx=NX):
    dt = 0.001
    t = np.arange(0.0, 0.3 + dt / 2, dt)
    trace = amplitude * wavelet_eval(WaveletSpec(25.0, 2 * DEPTH / V, 4.0), t)
    return SeismicSection(np.repeat(trace[:, None], nx, axis=1), dt, HX)


def _config(extra="", order=2):
    return parse_config(f"f0 = 25\nthreads = 1\ndepth_order = {order}\n" + extra)


@pytest.fixture(scope="module")
def model():
    return VelocityModel.constant(V, NX, NZ, HX, HZ)


@pytest.fixture(scope="module")
def flat_image(model):
    return run_migration(model, _flat_reflector_section(), _config())


def test_flat_reflector_lands_at_its_depth(flat_image):
    env = np.abs(hilbert(flat_image[:, NX // 2]))
    assert abs(np.argmax(env) * HZ - DEPTH) <= 2 * HZ


def test_migration_is_linear(model, flat_image):
    rng = np.random.default_rng(0)
    noise = SeismicSection(rng.normal(size=(301, NX)) * np.hanning(301)[:, None], 0.001, HX)
    a = run_migration(model, noise, _config())
    both = SeismicSection(2.0 * _flat_reflector_section().data - 0.5 * noise.data, 0.001, HX)
    c = run_migration(model, both, _config())
    assert np.abs(c - (2.0 * flat_image - 0.5 * a)).max() < 1e-10 * np.abs(c).max()


def test_prehalved_model_not_halved_twice(model, flat_image):
    img = run_migration(prepare_exploding_reflector(model), _flat_reflector_section(), _config())
    assert np.array_equal(img, flat_image)


def test_mismatched_grids_rejected(model):
    with pytest.raises(DomainError):
        run_migration(model, _flat_reflector_section(nx=NX + 1), _config())


def test_threads_do_not_change_results(model):
    sec = _flat_reflector_section()
    one = run_migration(model, sec, _config(order=4), threads=1)
    two = run_migration(model, sec, _config(order=4), threads=2)
    assert np.array_equal(one, two)


def test_progress_log_csv(tmp_path, model):
    path = tmp_path / "progress.csv"
    cfg = _config("eta = 400\nnterms = 6")
    with ProgressLog(path) as log:
        run_migration(model, _flat_reflector_section(), cfg, log)
    rows = list(csv.DictReader(path.open()))
    assert [int(r["m"]) for r in rows] == list(range(6))
    assert int(rows[-1]["factorizations"]) >= 1
    assert all(float(r["seconds"]) >= 0 for r in rows)


def test_impulse_volume_and_snapshot_agree():
    cfg = parse_config("velocity = 1000\nnx = 41\nnz = 21\nhx = 5\nhz = 5\nsnapshot_time = 0.25\n"
                       "f0 = 20\nt0 = 0.08\ndepth_order = 2\nthreads = 1")
    res = run_impulse(cfg, times=[0.15, 0.25], keep_volume=True)
    assert set(res.images) == {0.15, 0.25}
    assert res.source_index == 20
    for t, img in res.images.items():
        assert np.allclose(run_snapshot(res.volume, t), img, atol=1e-12)
    with pytest.raises(DomainError):
        run_snapshot(res.volume, 1.0)
    with pytest.raises(DomainError):
        run_snapshot("not a source", 0.1)


def test_impulse_needs_time_and_velocity():
    with pytest.raises(ConfigError):
        run_impulse(parse_config("velocity = 1000\nnx = 20\nnz = 5"))
    with pytest.raises(ConfigError):
        run_impulse(parse_config("nx = 20\nnz = 5\nsnapshot_time = 0.1"))
    with pytest.raises(ConfigError):
        run_impulse(parse_config("velocity = 1000\nsnapshot_time = 0.1"))


def test_trace_coefficients_reconstruct_pulse():
    w = WaveletSpec()
    spec = LaguerreSpec(0, 288.6, 512, 0.75)
    coeffs = CoefficientSeries(spec, trace_coefficients(spec, w))
    t = np.linspace(0.0, 0.75, 301)
    rec = run_snapshot(coeffs, t)
    assert np.abs(rec - wavelet_eval(w, t)).max() < 1e-2


def test_padding_round_trip():
    a = np.arange(12.0).reshape(3, 4)
    p = pad_columns(a, 2, "edge")
    assert p.shape == (3, 8) and np.all(p[:, 0] == a[:, 0])
    assert np.array_equal(trim_columns(p, 2), a)
    assert np.array_equal(trim_columns(pad_columns(a, 0), 0), a)


def test_wavefront_pick_on_synthetic_ring():
    # ring of radius 60 m plus a weaker inner ring: the pick follows the leading one
    z, x = np.mgrid[0:150, -100:101] * 1.0
    r = np.hypot(x, z)
    img = np.exp(-((r - 60.0) / 5.3) ** 2) * np.sin(0.75 * (r - 60.0))
    img += 0.5 * np.exp(-((r - 25.0) / 5.3) ** 2) * np.sin(0.75 * (r - 25.0))
    for angle in (0, 30, 60):
        assert wavefront_radius(img, 1.0, 1.0, 100, angle, 140.0) == pytest.approx(60.0, abs=0.5)
