import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from amchooser import io
from amchooser.vanilla import FreeBoundaryCurve, Side


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_round_trip(v):
    assert float(io.fmt_float(v)) == v


def test_nan_format():
    assert io.fmt_float(float("nan")) == "nan"


def test_surface_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    vals = rng.normal(size=(4, 6))
    xs = np.linspace(-1, 1, 6)
    tau = np.arange(4) * 0.1
    text = io.surface_csv(vals, xs, tau)
    assert text.splitlines()[0].startswith("tau,-1,")
    path = io.atomic_write(tmp_path / "s.csv", text)
    v2, x2, t2 = io.read_surface_csv(path)
    np.testing.assert_array_equal(v2, vals)
    np.testing.assert_array_equal(x2, xs)
    np.testing.assert_array_equal(t2, tau)


def test_boundary_round_trip(tmp_path):
    fb = FreeBoundaryCurve(Side.PUT_SIDE, np.array([0.0, 0.5]), np.array([np.nan, 4.25]), np.array([-1, 3]), 0.0)
    text = io.boundary_csv(fb)
    assert text == "tau,x,kind\n0,nan,put\n0.5,4.25,put\n"
    io.atomic_write(tmp_path / "b.csv", text)
    tau, x, kind = io.read_boundary_csv(tmp_path / "b.csv")
    assert kind == "put" and np.isnan(x[0]) and x[1] == 4.25


def test_regions_long_format():
    labels = np.array([[0, 1], [2, 0]], dtype=np.int8)
    text = io.regions_csv(labels, np.array([0.0, 1.0]), np.array([0.0, 0.5]))
    assert text == "tau,x,label\n0,0,0\n0,1,1\n0.5,0,2\n0.5,1,0\n"


def test_manifest_round_trip(tmp_path):
    entries = {"method": "psor", "eps": 1e-3, "M": 800}
    io.atomic_write(tmp_path / "manifest", io.manifest_text(entries))
    got = io.read_manifest(tmp_path / "manifest")
    assert got == {"method": "psor", "eps": "0.001", "M": "800"}
    assert not list(tmp_path.glob(".*tmp"))


def test_reader_rejects_wrong_file(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n")
    with pytest.raises(ValueError):
        io.read_surface_csv(p)
    with pytest.raises(ValueError):
        io.read_boundary_csv(p)
