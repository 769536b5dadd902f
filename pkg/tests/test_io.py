import numpy as np

from mincurv.grid import BoolMask, GridField
from mincurv.io import (read_points_csv, read_vtk, write_field_csv, write_json, write_points_csv,
                        write_segments_csv, write_vtk)


def test_vtk_round_trip_2d_and_3d(tmp_path):
    rng = np.random.default_rng(0)
    for dims in ((4, 6), (3, 4, 5)):
        f = GridField(np.arange(len(dims)) * 0.5 - 1, 0.25, rng.normal(size=dims), -0.75)
        path = tmp_path / f"f{len(dims)}.vtk"
        write_vtk(path, f)
        text = path.read_text().splitlines()
        assert text[0] == "# vtk DataFile Version 3.0"
        assert "DATASET STRUCTURED_POINTS" in text
        g = read_vtk(path)
        assert g.dims == f.dims and g.h == f.h and g.far_value == f.far_value
        assert np.array_equal(g.values, f.values)
        assert np.allclose(g.origin, f.origin)


def test_vtk_x_fastest(tmp_path):
    v = np.array([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]])  # index [i, j]
    write_vtk(tmp_path / "o.vtk", GridField(np.zeros(2), 1.0, v))
    data = [float(x) for x in (tmp_path / "o.vtk").read_text().split("LOOKUP_TABLE default\n")[1].split()]
    assert data == [0.0, 2.0, 4.0, 1.0, 3.0, 5.0]


def test_mask_vtk(tmp_path):
    m = BoolMask(np.eye(3, dtype=bool), np.zeros(2), 0.1)
    write_vtk(tmp_path / "m.vtk", m)
    g = read_vtk(tmp_path / "m.vtk")
    assert np.array_equal(g.values, np.eye(3))


def test_field_csv(tmp_path):
    f = GridField(np.zeros(2), 1.0, np.arange(6.0).reshape(2, 3))
    write_field_csv(tmp_path / "f.csv", f)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "i,j,k,value"
    assert lines[1 + 4] == "1,1,0,4.0"


def test_points_round_trip(tmp_path):
    pts = np.array([[0.1, 0.2], [1.0 / 3.0, -2.0]])
    write_points_csv(tmp_path / "p.csv", pts, {"converged": "true"})
    text = (tmp_path / "p.csv").read_text()
    assert text.startswith("# converged=true\nx,y\n")
    assert np.array_equal(read_points_csv(tmp_path / "p.csv"), pts)


def test_segments_and_json(tmp_path):
    write_segments_csv(tmp_path / "s.csv", [((0.0, 0.0), (1.0, 2.0))])
    assert (tmp_path / "s.csv").read_text().splitlines() == ["ax,ay,bx,by", "0.0,0.0,1.0,2.0"]
    write_json(tmp_path / "a.json", {"b": 1, "a": [1, 2]})
    assert (tmp_path / "a.json").read_text().index('"a"') < (tmp_path / "a.json").read_text().index('"b"')
