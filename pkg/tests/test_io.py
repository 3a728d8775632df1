import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scns.grid import GridSpec
from scns.io import FieldFile, read_field, write_field, write_report, write_vtk


@given(st.integers(4, 9), st.integers(4, 9), st.data(),
       st.floats(allow_nan=False, allow_infinity=False), st.floats(0.1, 10))
def test_field_csv_roundtrip_bitwise(tmp_path_factory, nx, ny, data, t, lx):
    g = GridSpec(nx, ny, lx, 1.0)
    vals = data.draw(arrays(np.float64, g.shape, elements=st.floats(allow_nan=False, width=64)))
    f = FieldFile(g, "p", t, vals)
    path = write_field(tmp_path_factory.mktemp("f") / "p.csv", f)
    back = read_field(path)
    assert back == f
    assert back.values.tobytes() == vals.tobytes()


def test_field_shape_checked(tmp_path):
    with pytest.raises(ValueError):
        FieldFile(GridSpec(4, 4), "p", 0.0, np.zeros((3, 4)))
    bad = tmp_path / "x.csv"
    bad.write_text("1,2\n")
    with pytest.raises(ValueError, match="field file"):
        read_field(bad)


def test_vtk_layout(tmp_path):
    g = GridSpec(4, 5)
    p = np.arange(20.0).reshape(4, 5)
    v = np.stack([p, -p])
    text = write_vtk(tmp_path / "s.vtk", g, {"p": p}, {"v": v}).read_text().splitlines()
    assert text[0].startswith("# vtk DataFile") and "DIMENSIONS 5 6 1" in text
    i = text.index("LOOKUP_TABLE default")
    # x varies fastest
    assert [float(s) for s in text[i + 1:i + 3]] == [p[0, 0], p[1, 0]]
    assert len([ln for ln in text if ln.endswith(" 0.0") and ln.count(" ") == 2]) == 20


def test_report_handles_numpy_and_nonfinite(tmp_path):
    import json
    path = write_report(tmp_path / "r.json", {"a": np.arange(3), "b": np.float64("inf"),
                                              "c": (np.int64(2), np.bool_(True))})
    d = json.loads(path.read_text())
    assert d == {"a": [0, 1, 2], "b": "inf", "c": [2, True]}
