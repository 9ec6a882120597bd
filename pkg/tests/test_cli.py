import json
import subprocess
import sys

import numpy as np
import pytest

from pinchnoma.cli import main
from pinchnoma.config import load_config
from pinchnoma.errors import ConfigError
from pinchnoma.model import dbm_to_w
from pinchnoma.neural.cnn import init_model
from pinchnoma.neural.io import save_model


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def small_cfg(tmp_path):
    return write(tmp_path / "cfg.json", {
        "system": {"antennas": 2, "users": 2, "snr_db": 20},
        "experiment": {"schemes": ["C-NOMA", "FPA-NOMA"], "sweep_values": [20], "trials": 2,
                       "targets_bps": [0.0, 1e-3]},
    })


def test_unknown_key_exits_1(tmp_path, capsys):
    cfg = write(tmp_path / "bad.json", {"system": {"antenas": 3}})
    assert main(["placement", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "antenas" in capsys.readouterr().err


def test_malformed_json_exits_1(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["sweep", "--config", str(tmp_path / "bad.json"), "--out", str(tmp_path)]) == 1


def test_empty_scheme_list_exits_1(tmp_path):
    cfg = write(tmp_path / "c.json", {"experiment": {"schemes": []}})
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_cnn_without_model_exits_1(tmp_path):
    cfg = write(tmp_path / "c.json", {"experiment": {"schemes": ["CNN-NOMA"]}})
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path), "--trials", "1"]) == 1


def test_zero_gain_exits_2(tmp_path):
    (tmp_path / "g.csv").write_text("re_g,im_g\n0.0,0.0\n1e-4,0.0\n")
    assert main(["power", "--gains", str(tmp_path / "g.csv"), "--out", str(tmp_path)]) == 2


def test_power_single_user_and_k2_closed_form(tmp_path):
    (tmp_path / "one.csv").write_text("re_g,im_g\n1e-4,2e-4\n")
    assert main(["power", "--gains", str(tmp_path / "one.csv"), "--power-w", "2.5", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "allocation.json").read_text())["q_w"] == [2.5]
    # gamma = 1, P / sigma^2 = 8  ->  t = 2, q = (3P/4, P/4)
    (tmp_path / "two.csv").write_text("re_g,im_g\n1.0,0.0\n0.0,1.0\n")
    assert main(["power", "--gains", str(tmp_path / "two.csv"), "--power-w", "8", "--noise-w", "1",
                 "--out", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "allocation.json").read_text())
    assert out["t_opt"] == pytest.approx(2.0, rel=1e-6)
    assert sorted(out["q_w"]) == pytest.approx([2.0, 6.0], rel=1e-6)


def test_crc_mismatch_exits_3(tmp_path, small_cfg):
    save_model(tmp_path / "m.pcnn", init_model(2, np.random.default_rng(0)))
    raw = bytearray((tmp_path / "m.pcnn").read_bytes())
    raw[40] ^= 0xFF
    (tmp_path / "m.pcnn").write_bytes(bytes(raw))
    assert main(["dataset", "--config", small_cfg, "--n-train", "0", "--n-test", "2", "--mode", "gaussian",
                 "--out", str(tmp_path)]) == 0
    assert main(["infer", "--model", str(tmp_path / "m.pcnn"), "--data", str(tmp_path / "test.csv"),
                 "--out", str(tmp_path)]) == 3


def test_validate_exit_codes(tmp_path, capsys):
    assert main(["validate"]) == 0
    report = capsys.readouterr().out
    assert report.count("PASS") >= 6 and "FAIL" not in report
    assert main(["validate", "--inject-fault"]) == 4
    assert "FAIL gradient-check" in capsys.readouterr().out


def test_placement_seeded_and_single_user(tmp_path, small_cfg):
    for d in ("a", "b"):
        assert main(["placement", "--config", small_cfg, "--seed", "5", "--out", str(tmp_path / d)]) == 0
    for f in ("placement.json", "trace.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    cfg = write(tmp_path / "one.json", {"system": {"antennas": 1, "users": 1}})
    lay = write(tmp_path / "lay.json", {"users": [[2.2, -1.5]]})
    assert main(["placement", "--config", cfg, "--layout", lay, "--out", str(tmp_path / "c")]) == 0
    xs = json.loads((tmp_path / "c" / "placement.json").read_text())["antenna_x_m"]
    assert xs[0] == pytest.approx(2.2, abs=1e-3)


def test_train_smoke_and_infer(tmp_path, small_cfg):
    assert main(["dataset", "--config", small_cfg, "--n-train", "50", "--n-test", "5", "--mode", "gaussian",
                 "--out", str(tmp_path)]) == 0
    assert main(["train", "--config", small_cfg, "--data", str(tmp_path / "train.csv"), "--epochs", "2",
                 "--out", str(tmp_path)]) == 0
    curves = (tmp_path / "curves.csv").read_text().splitlines()
    assert 1 < len(curves) <= 1 + 5 * 2
    assert main(["infer", "--model", str(tmp_path / "model.pcnn"), "--data", str(tmp_path / "test.csv"),
                 "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "allocations.csv").read_text().splitlines()
    assert len(rows) == 1 + 5 * 2


def test_sweep_and_outage_outputs(tmp_path, small_cfg):
    assert main(["sweep", "--config", small_cfg, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "results.csv").read_text().splitlines()[0] == \
        "scheme,sweep_var,sweep_value,trial,seed,sum_rate_bpshz,min_rate_bpshz,outage,wall_ms"
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert {g["scheme"] for g in summary["groups"]} == {"C-NOMA", "FPA-NOMA"}
    assert main(["outage", "--config", small_cfg, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "outage.csv").read_text().splitlines()[1:]
    assert [r.split(",")[2] for r in rows if r.split(",")[1] == "0.0"] == ["0.0", "0.0"]


def test_dbm_and_snr_conversions(tmp_path):
    assert dbm_to_w(30.0) == pytest.approx(1.0)
    assert dbm_to_w(-90.0) == pytest.approx(1e-12)
    rc = load_config(write(tmp_path / "p.json", {"system": {"power_dbm": 10}}))
    assert rc.system.total_power_w == pytest.approx(1e-2)
    rc = load_config(write(tmp_path / "s.json", {"system": {"snr_db": 10}}))
    assert rc.system.total_power_w == pytest.approx(1e-11)
    with pytest.raises(ConfigError):
        load_config(write(tmp_path / "both.json", {"system": {"snr_db": 10, "power_dbm": 10}}))


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "pinchnoma.cli", "validate", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "--inject-fault" in r.stdout
