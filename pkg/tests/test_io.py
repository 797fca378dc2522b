import json

import numpy as np
import pytest
from PIL import Image

from photon_fabric import io as pfio


def test_density_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    rho = rng.random((17, 9))
    path = tmp_path / "rho.csv"
    pfio.write_density_csv(path, rho, meta={"seed": 3})
    back = pfio.read_density_csv(path)
    assert back.shape == rho.shape
    np.testing.assert_allclose(back, rho, atol=1e-9)
    text = path.read_text()
    assert text.startswith("# photon-fabric")
    assert "seed=3" in text


def test_table_csv_roundtrip(tmp_path):
    path = tmp_path / "t.csv"
    cols = {"a": np.arange(5.0), "b": np.linspace(0, 1, 5)}
    pfio.write_table_csv(path, cols)
    names, data = pfio.read_table_csv(path)
    assert names == ["a", "b"]
    np.testing.assert_allclose(data[:, 0], cols["a"])
    np.testing.assert_allclose(data[:, 1], cols["b"])


def test_table_csv_length_mismatch(tmp_path):
    with pytest.raises(ValueError):
        pfio.write_table_csv(tmp_path / "t.csv",
                             {"a": np.arange(3), "b": np.arange(4)})


def test_history_csv(tmp_path):
    hist = [{"iteration": 0, "objective": 0.1, "beta": 1.0},
            {"iteration": 1, "objective": 0.4, "beta": 1.0, "step": 0.05}]
    path = tmp_path / "h.csv"
    pfio.write_history_csv(path, hist)
    names, data = pfio.read_table_csv(path)
    assert names[:3] == ["iteration", "objective", "beta"]
    assert data.shape == (2, 4)
    assert np.isnan(data[0, names.index("step")])


def test_spectra_csv_wavelength_first(tmp_path):
    wl = np.array([1549.0, 1550.0, 1551.0])
    path = tmp_path / "s.csv"
    pfio.write_spectra_csv(path, wl, {"P_through": wl * 0 + 0.9,
                                      "P_drop": wl * 0 + 0.05})
    names, data = pfio.read_table_csv(path)
    assert names[0] == "wavelength_nm"
    np.testing.assert_allclose(data[:, 0], wl)


def test_json_roundtrip(tmp_path):
    path = tmp_path / "m.json"
    pfio.write_json(path, {"metrics": {"il_db": 0.2}}, meta={"config_sha256": "ab"})
    doc = pfio.read_json(path)
    assert doc["metrics"]["il_db"] == 0.2
    assert doc["config_sha256"] == "ab"
    assert doc["toolkit"].startswith("photon-fabric")
    # stable key order for golden diffs
    assert path.read_text() == json.dumps(doc, indent=2, sort_keys=True) + "\n"


def test_density_png_orientation(tmp_path):
    rho = np.zeros((4, 3))
    rho[0, 2] = 1.0  # smallest x, largest y -> top-left pixel
    path = tmp_path / "rho.png"
    pfio.write_density_png(path, rho)
    img = np.asarray(Image.open(path))
    assert img.shape == (3, 4)
    assert img[0, 0] == 255
    assert img.sum() == 255
