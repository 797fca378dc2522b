import json

import numpy as np
import pytest

from photon_fabric import fabric, io
from photon_fabric.cli import main
from photon_fabric.fabric import ArchitectureSpec, CircuitLayout


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# --- circuit ------------------------------------------------------------------

def test_circuit_piloss_counts(tmp_path):
    assert main(["circuit", "--kind", "piloss", "--n", "8",
                 "--out", str(tmp_path)]) == 0
    counts = read_json(tmp_path / "counts.json")["counts"]
    assert counts["active"] == 64
    assert counts["passive_crossovers"] == 49


def test_circuit_crosspoint_rails(tmp_path):
    assert main(["circuit", "--kind", "crosspoint", "--n", "8",
                 "--out", str(tmp_path)]) == 0
    doc = read_json(tmp_path / "counts.json")
    assert doc["n_rails"] == 16


def test_circuit_layout_roundtrips(tmp_path):
    assert main(["circuit", "--kind", "spanke_benes", "--n", "6",
                 "--out", str(tmp_path)]) == 0
    loaded = fabric.layout_from_json(read_json(tmp_path / "layout.json"))
    assert loaded == fabric.generate(ArchitectureSpec("spanke_benes", n=6))


def test_circuit_unknown_kind_exits_2(tmp_path):
    assert main(["circuit", "--kind", "escher", "--out", str(tmp_path)]) == 2


def test_circuit_unsupported_size_exits_2(tmp_path):
    assert main(["circuit", "--kind", "clos_benes_16", "--n", "8",
                 "--out", str(tmp_path)]) == 2


# --- route --------------------------------------------------------------------

def circuit_files(tmp_path, kind, n=None):
    argv = ["circuit", "--kind", kind, "--out", str(tmp_path)]
    if n is not None:
        argv += ["--n", str(n)]
    assert main(argv) == 0
    return tmp_path / "layout.json"


def test_route_spanke_identity_zero_active(tmp_path):
    layout = circuit_files(tmp_path, "spanke_benes", 8)
    req = tmp_path / "request.json"
    req.write_text(json.dumps({"permutation": list(range(8))}))
    assert main(["route", "--layout", str(layout), "--request", str(req),
                 "--out", str(tmp_path)]) == 0
    names, data = io.read_table_csv(tmp_path / "verification.csv")
    assert data.shape[0] == 1
    assert data[0, names.index("verified")] == 1.0
    assert data[0, names.index("non_ambient")] == 0.0


def test_route_crosspoint_reversal_eight_bars(tmp_path):
    layout = circuit_files(tmp_path, "crosspoint", 8)
    req = tmp_path / "request.json"
    req.write_text(json.dumps({"permutation": [7 - i for i in range(8)]}))
    assert main(["route", "--layout", str(layout), "--request", str(req),
                 "--out", str(tmp_path)]) == 0
    state = read_json(tmp_path / "state_000.json")
    assert state["verified"] is True
    assert state["non_ambient"] == 8
    bars = [c for c, s in state["actuation"].items() if s == "bar"]
    assert len(bars) == 8


def test_route_batch_writes_one_row_each(tmp_path):
    layout = circuit_files(tmp_path, "spanke_benes", 4)
    req = tmp_path / "request.json"
    req.write_text(json.dumps({"requests": [
        {"permutation": [0, 1, 2, 3]},
        {"permutation": [3, 2, 1, 0]},
    ]}))
    assert main(["route", "--layout", str(layout), "--request", str(req),
                 "--out", str(tmp_path)]) == 0
    names, data = io.read_table_csv(tmp_path / "verification.csv")
    assert data.shape[0] == 2
    assert (tmp_path / "state_001.json").exists()


def test_route_colliding_wavelengths_exit_4(tmp_path):
    layout = circuit_files(tmp_path, "wss_6x6x4")
    pal = fabric.PALETTE_4
    req = tmp_path / "request.json"
    req.write_text(json.dumps({"routes": [[0, pal[0], 2], [1, pal[0], 2]]}))
    assert main(["route", "--layout", str(layout), "--request", str(req),
                 "--out", str(tmp_path)]) == 4


def test_route_malformed_request_exit_2(tmp_path):
    layout = circuit_files(tmp_path, "crosspoint", 4)
    req = tmp_path / "request.json"
    req.write_text(json.dumps({"shuffle": True}))
    assert main(["route", "--layout", str(layout), "--request", str(req),
                 "--out", str(tmp_path)]) == 2


# --- simulate -----------------------------------------------------------------

def test_simulate_bare_rails_zero_loss(tmp_path):
    bare = CircuitLayout(kind="bare", n_rails=2, columns=(),
                         input_rails=(0, 1), output_rails=(0, 1))
    layout = tmp_path / "layout.json"
    layout.write_text(json.dumps(fabric.layout_to_json(bare)))
    state = tmp_path / "state.json"
    state.write_text(json.dumps({"actuation": {}}))
    assert main(["simulate", "--layout", str(layout), "--state", str(state),
                 "--start", "1548", "--stop", "1552", "--step", "2",
                 "--out", str(tmp_path)]) == 0
    names, data = io.read_table_csv(tmp_path / "path_metrics.csv")
    il = data[:, names.index("il_db")]
    assert np.allclose(il, 0.0, atol=1e-12)


def test_simulate_multicrossbar_dips_at_colors(tmp_path):
    layout = circuit_files(tmp_path, "multicrossbar")
    colors = fabric.PALETTE_3
    req = tmp_path / "request.json"
    req.write_text(json.dumps(
        {"routes": [[0, c, 1] for c in colors]}))
    assert main(["route", "--layout", str(layout), "--request", str(req),
                 "--out", str(tmp_path)]) == 0
    assert main(["simulate", "--layout", str(layout),
                 "--state", str(tmp_path / "state_000.json"),
                 "--start", "1547", "--stop", "1553", "--step", "0.5",
                 "--out", str(tmp_path)]) == 0
    names, data = io.read_table_csv(tmp_path / "spectra.csv")
    wl = data[:, names.index("wavelength_nm")]
    straight = data[:, names.index("p_in0_out0")]
    for c in colors:
        assert straight[np.isclose(wl, c)][0] < 0.1
    for mid in (1547.0, 1549.0, 1551.0, 1553.0):
        assert straight[np.isclose(wl, mid)][0] > 0.5


# --- optimize / evaluate / sweep ----------------------------------------------

def test_optimize_artifacts_and_reproducibility(tmp_path):
    argv = ["optimize", "--device", "splitter", "--scale", "desk",
            "--seed", "7", "--iterations", "3", "--out", str(tmp_path)]
    assert main(argv) == 0
    first = (tmp_path / "history.csv").read_bytes()
    doc = read_json(tmp_path / "metrics.json")
    assert doc["converged"] is True
    assert doc["seed"] == 7
    names, data = io.read_table_csv(tmp_path / "history.csv")
    assert data.shape[0] == 3
    assert main(argv) == 0
    assert (tmp_path / "history.csv").read_bytes() == first


def test_optimize_missing_seed_exit_2(tmp_path):
    assert main(["optimize", "--device", "splitter", "--scale", "desk",
                 "--out", str(tmp_path)]) == 2


def test_optimize_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"device": "splitter", "scale": "desk",
                               "seed": 3, "iterations": 2}))
    assert main(["optimize", "--config", str(cfg), "--iterations", "1",
                 "--out", str(tmp_path)]) == 0
    _, data = io.read_table_csv(tmp_path / "history.csv")
    assert data.shape[0] == 1


def test_optimize_bad_device_in_config_exit_2(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"device": "isolator", "scale": "desk",
                               "seed": 3}))
    assert main(["optimize", "--config", str(cfg),
                 "--out", str(tmp_path)]) == 2


def test_evaluate_golden_splitter(tmp_path, golden_dir):
    assert main(["evaluate", "--density", str(golden_dir / "splitter_density.csv"),
                 "--device", "splitter", "--scale", "desk",
                 "--out", str(tmp_path)]) == 0
    doc = read_json(tmp_path / "metrics.json")
    conds = {c["condition"]: c for c in doc["conditions"]}
    assert set(conds) == {"top_in", "bottom_in"}
    for c in conds.values():
        assert c["insertion_loss_db"] < 1.0


def test_evaluate_shape_mismatch_exit_2(tmp_path):
    bad = tmp_path / "bad.csv"
    io.write_density_csv(bad, np.zeros((5, 5)))
    assert main(["evaluate", "--density", str(bad), "--device", "splitter",
                 "--scale", "desk", "--out", str(tmp_path)]) == 2


def test_evaluate_missing_file_exit_2(tmp_path):
    assert main(["evaluate", "--density", str(tmp_path / "nope.csv"),
                 "--device", "splitter", "--out", str(tmp_path)]) == 2


def test_sweep_writes_spectra(tmp_path, golden_dir):
    assert main(["sweep", "--density", str(golden_dir / "resonator_density.csv"),
                 "--scale", "desk", "--start", "1550", "--stop", "1551",
                 "--step", "0.5", "--out", str(tmp_path)]) == 0
    names, data = io.read_table_csv(tmp_path / "spectra.csv")
    assert names == ["wavelength_nm", "p_through", "p_drop"]
    assert data.shape == (3, 3)


def test_sweep_fit_without_resonance_exit_3(tmp_path, golden_dir):
    assert main(["sweep", "--density", str(golden_dir / "splitter_density.csv"),
                 "--scale", "desk", "--start", "1549", "--stop", "1551",
                 "--step", "0.5", "--fit", "--out", str(tmp_path)]) == 3


def test_sweep_band_validation_exit_2(tmp_path, golden_dir):
    assert main(["sweep", "--density", str(golden_dir / "splitter_density.csv"),
                 "--start", "1552", "--stop", "1550",
                 "--out", str(tmp_path)]) == 2


# --- report -------------------------------------------------------------------

def test_report_summarizes_route_run(tmp_path):
    layout = circuit_files(tmp_path, "spanke_benes", 4)
    req = tmp_path / "request.json"
    req.write_text(json.dumps({"permutation": [1, 0, 3, 2]}))
    assert main(["route", "--layout", str(layout), "--request", str(req),
                 "--out", str(tmp_path)]) == 0
    assert main(["report", "--dir", str(tmp_path)]) == 0
    doc = read_json(tmp_path / "report.json")
    assert doc["sections"]["verification"] == {"requests": 1, "verified": 1}
    assert doc["sections"]["circuit"]["counts"]["active"] == 6


def test_report_empty_dir_exit_2(tmp_path):
    assert main(["report", "--dir", str(tmp_path)]) == 2


@pytest.fixture
def golden_dir():
    from pathlib import Path
    return Path(__file__).parent / "golden"
