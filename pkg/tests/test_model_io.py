import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfd.errors import (
    BadMagicError,
    DomainError,
    GridFormatError,
    NonFiniteDataError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from lfd.laguerre import LaguerreSpec
from lfd.model_io import (
    KIND_IMAGE,
    DecayWarning,
    GridImage,
    SeismicSection,
    VelocityModel,
    decode,
    encode,
    export_csv,
    image_grid,
    prepare_exploding_reflector,
    read_grid,
    transform_section,
    write_grid,
)


def _u32(v):
    return int(v).to_bytes(4, "little")


# 2 x 3 velocity grid written out by hand: header fields, then float32 rows
GOLDEN = (
    b"LFDG" + _u32(1) + _u32(1) + _u32(3) + _u32(2)
    + bytes.fromhex("0000000000001440")  # d_fast = 5.0
    + bytes.fromhex("0000000000000040")  # d_slow = 2.0
    + bytes.fromhex("0000000000005940")  # origin_fast = 100.0
    + bytes.fromhex("0000000000000000")  # origin_slow = 0.0
    + np.array([1500, 1600, 1700, 2000, 2100, 2200], dtype="<f4").tobytes()
)


def test_golden_velocity_bytes():
    model = VelocityModel(np.array([[1500.0, 1600, 1700], [2000, 2100, 2200]]), 5.0, 2.0, 100.0, 0.0)
    assert encode(model) == GOLDEN
    back = decode(GOLDEN)
    assert isinstance(back, VelocityModel)
    assert back.hx == 5.0 and back.hz == 2.0 and back.origin_x == 100.0
    assert np.array_equal(back.c, model.c)
    assert len(GOLDEN) == 52 + 24


def test_corrupted_headers_raise_distinct_errors():
    with pytest.raises(BadMagicError):
        decode(b"LFDX" + GOLDEN[4:])
    with pytest.raises(UnsupportedVersionError):
        decode(GOLDEN[:4] + _u32(2) + GOLDEN[8:])
    with pytest.raises(TruncatedPayloadError):
        decode(GOLDEN[:-4])
    with pytest.raises(TruncatedPayloadError):
        decode(GOLDEN[:30])
    with pytest.raises(GridFormatError):
        decode(GOLDEN + b"\0")
    with pytest.raises(GridFormatError):
        decode(GOLDEN[:8] + _u32(9) + GOLDEN[12:])
    bad = bytearray(GOLDEN)
    bad[52:56] = np.array([np.nan], dtype="<f4").tobytes()
    with pytest.raises(NonFiniteDataError):
        decode(bytes(bad))
    for err in (BadMagicError, UnsupportedVersionError, TruncatedPayloadError, NonFiniteDataError):
        assert issubclass(err, GridFormatError)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
def test_section_round_trip(nt, nx, seed):
    data = np.random.default_rng(seed).normal(size=(nt, nx)).astype(np.float32).astype(float)
    sec = SeismicSection(data, 0.004, 12.5, -50.0)
    back = decode(encode(sec))
    assert isinstance(back, SeismicSection)
    assert np.array_equal(back.data, data)
    assert (back.dt, back.dx, back.origin_x) == (0.004, 12.5, -50.0)


def test_image_round_trip_and_csv(tmp_path):
    img = image_grid(np.arange(6.0).reshape(2, 3), 1.0, 0.5)
    write_grid(img, tmp_path / "i.lfdg")
    back = read_grid(tmp_path / "i.lfdg")
    assert isinstance(back, GridImage) and back.kind == KIND_IMAGE
    assert np.array_equal(back.values, img.values)
    export_csv(back.values, tmp_path / "i.csv")
    assert np.array_equal(np.loadtxt(tmp_path / "i.csv", delimiter=","), img.values)


def test_writer_refuses_nonfinite():
    with pytest.raises(NonFiniteDataError):
        encode(image_grid(np.array([[np.inf]]), 1.0, 1.0))


def test_model_validation_and_halving():
    with pytest.raises(DomainError):
        VelocityModel(np.array([[1500.0, -1.0]]), 1.0, 1.0)
    m = VelocityModel.constant(2000.0, 20, 4, 5.0, 2.0)
    h = prepare_exploding_reflector(m)
    assert h.halved and not m.halved
    assert np.all(h.c == 1000.0) and np.all(m.c == 2000.0)
    assert (m.grid.nx, m.grid.nz) == (20, 4)


def test_section_record_length_and_decay():
    sec = SeismicSection(np.ones((101, 2)), 0.01, 1.0)
    assert sec.record_length == pytest.approx(1.0)
    with pytest.warns(DecayWarning):
        sec.check_decay()
    quiet = np.zeros((101, 2))
    quiet[10] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert SeismicSection(quiet, 0.01, 1.0).check_decay() == 0.0


def test_transform_needs_horizon_covering_record():
    sec = SeismicSection(np.zeros((101, 3)), 0.01, 1.0)
    with pytest.raises(DomainError):
        transform_section(sec, LaguerreSpec(0, 100.0, 10, 0.5))
    assert transform_section(sec, LaguerreSpec(0, 100.0, 10, 1.0)).values.shape == (10, 3)
