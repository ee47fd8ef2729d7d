import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from axisonic.background import SonicCase
from axisonic.output import (emit_plot_data, read_csv, read_json, svg_line_plot, to_jsonable, write_csv, write_dat,
                             write_json)

SVG = "{http://www.w3.org/2000/svg}"


class TestCsv:
    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=40))
    def test_roundtrip_exact(self, tmp_path_factory, values):
        path = tmp_path_factory.mktemp("csv") / "v.csv"
        a = np.array(values)
        write_csv(path, ["a", "b"], [a, -a])
        back = read_csv(path)
        np.testing.assert_array_equal(back["a"], a)
        np.testing.assert_array_equal(back["b"], -a)

    def test_integers_and_mismatch(self, tmp_path):
        path = write_csv(tmp_path / "i.csv", ["j", "v"], [np.arange(3), [0.5, 1.0, 2.0]])
        assert path.read_text().splitlines() == ["j,v", "0,0.5", "1,1", "2,2"]
        with pytest.raises(ValueError):
            write_csv(tmp_path / "bad.csv", ["a", "b"], [[1.0], [1.0, 2.0]])


class TestJson:
    def test_non_finite_and_enums(self, tmp_path):
        obj = {"b": np.array([1.0, np.nan]), "a": (np.int64(3), np.float32(0.5), np.bool_(True)),
               "case": SonicCase.HOLDER, "inf": float("inf")}
        assert to_jsonable(obj) == {"b": [1.0, None], "a": [3, 0.5, True], "case": "holder", "inf": None}
        path = write_json(tmp_path / "o.json", obj)
        assert read_json(path)["case"] == "holder"
        keys = list(json.loads(path.read_text()).keys())
        assert keys == sorted(keys)

    def test_deterministic(self, tmp_path):
        obj = {"z": 1.0 / 3.0, "a": [1, 2]}
        assert write_json(tmp_path / "1.json", obj).read_bytes() == write_json(tmp_path / "2.json", obj).read_bytes()


def test_dat_header(tmp_path):
    text = write_dat(tmp_path / "c.dat", ["x", "y"], [[0.0, 1.0], [2.0, 3.0]]).read_text()
    assert text.splitlines() == ["# x y", "0 2", "1 3"]


class TestSvg:
    def test_well_formed(self):
        x = np.linspace(0.0, 1.0, 11)
        root = ET.fromstring(svg_line_plot(x, x**2, "t < 1 & more", "x", "y"))
        assert root.tag == SVG + "svg"
        poly = root.findall(SVG + "polyline")
        assert len(poly) == 1
        pts = poly[0].get("points").split()
        assert len(pts) == 11
        texts = [t.text for t in root.iter(SVG + "text")]
        assert "t < 1 & more" in texts

    def test_vertical_line(self):
        # the front at eps = 0 is xi = 0 for every r: constant abscissa must still plot
        r = np.linspace(0.0, 1.0, 5)
        root = ET.fromstring(svg_line_plot(np.zeros(5), r, "front", "x1", "r"))
        xs = {p.split(",")[0] for p in root.find(SVG + "polyline").get("points").split()}
        assert len(xs) == 1

    def test_rejects_bad_data(self):
        with pytest.raises(ValueError):
            svg_line_plot([0.0, 1.0], [np.nan, 1.0], "t", "x", "y")
        with pytest.raises(ValueError):
            svg_line_plot([], [], "t", "x", "y")

    def test_emit(self, tmp_path):
        written = emit_plot_data(tmp_path / "plots", {"b": ([0, 1], [1, 2], "b", "x", "y"),
                                                      "a": ([0, 1], [3, 4], "a", "x", "y")})
        assert [p.name for p in written] == ["a.dat", "a.svg", "b.dat", "b.svg"]
        assert emit_plot_data(tmp_path, {"c": ([0, 1], [0, 1], "c", "x", "y")}, ["svg"])[0].suffix == ".svg"
