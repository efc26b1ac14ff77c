import json

import numpy as np
import pytest

from earlywarn import cli

SMALL = """\
data: {cadence_s: 120, restart_exclusion_s: 1800, window_minutes: 60}
features: {threshold: 0.45, max_points: 300, restarts: 1}
gdcpd: {k: 1, window: 3, restarts: 1, n_candidates: 3, min_lengthscale: 240.0}
monitor: {window: 3}
rul: {hidden: 8, layers: 1, epochs: 2}
seeds: {root: 0}
"""


@pytest.fixture(scope="module")
def plant(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "small.yaml").write_text(SMALL)
    assert cli.main(["simulate", "--kind", "plant", "--cycles", "10", "--out", str(root / "d")]) == 0
    ws = root / "ws"
    common = [str(root / "d" / "plant.csv"), "--config", str(root / "small.yaml"), "--out", str(ws)]
    assert cli.main(["run-offline", *common]) == 0
    assert cli.main(["run-online", *common]) == 0
    assert cli.main(["evaluate", "--out", str(ws)]) == 0
    return root, ws, common


def test_simulate_mjd(tmp_path):
    out = tmp_path / "m"
    assert cli.main(["simulate", "--scenario", "MJD_t_no", "--replications", "2", "--out", str(out)]) == 0
    lines = (out / "MJD_t_no_seed1.csv").read_text().splitlines()
    assert lines[0] == "time,x1" and len(lines) == 1002
    truth = json.loads((out / "mjd_truth.json").read_text())
    assert truth["MJD_t_no_seed0.csv"]["changepoints"] == [5.7057]


def test_simulate_rejects_unknown_scenario(tmp_path, capsys):
    assert cli.main(["simulate", "--scenario", "nope", "--out", str(tmp_path)]) == 2
    assert "unknown scenarios" in capsys.readouterr().err


def test_plant_csv_header(plant):
    root, _, _ = plant
    header = (root / "d" / "plant.csv").read_text().splitlines()[0]
    assert header == "time,y," + ",".join(f"x{i}" for i in range(1, 13))


def test_offline_writes_bundle_with_manifest(plant):
    _, ws, _ = plant
    manifest = json.loads((ws / "bundle" / "manifest.json").read_text())
    assert set(manifest["files"]) == {"bundle.json"}
    feats = json.loads((ws / "features.json").read_text())
    assert {"x2", "x5", "x9"} <= {feats["feature_names"][i] for i in feats["selected"]}


def test_report_files(plant):
    _, ws, _ = plant
    rep = json.loads((ws / "report" / "report.json").read_text())
    per, agg = rep["per_cycle"], rep["aggregate"]
    assert agg["points"] == sum(r["n_points"] for r in per)
    assert (ws / "report" / "report.txt").read_text().startswith("cycle\talarm")
    rul = np.loadtxt(ws / "report" / "cycle000_rul.tsv", skiprows=1, ndmin=2)
    assert rul.shape[1] == 3
    header = (ws / "report" / "cycle000_wmd.tsv").read_text().splitlines()[0]
    assert header == "time\twmd"


def test_offline_is_byte_deterministic(plant, tmp_path):
    root, ws, common = plant
    ws2 = tmp_path / "again"
    args = [common[0], "--config", common[2], "--out", str(ws2)]
    assert cli.main(["run-offline", *args]) == 0
    assert (ws2 / "bundle" / "bundle.json").read_bytes() == (ws / "bundle" / "bundle.json").read_bytes()


def test_staged_commands_match_offline(plant, tmp_path):
    root, ws, common = plant
    ws2 = tmp_path / "staged"
    args = [common[0], "--config", common[2], "--out", str(ws2)]
    for cmd in ("select-features", "detect", "calibrate-threshold", "monitor", "train-rul"):
        assert cli.main([cmd, *args]) == 0, cmd
    for name in ("features.json", "monitor.json", "network.json"):
        assert json.loads((ws2 / name).read_text()) == json.loads((ws / name).read_text()), name
    wmd = np.loadtxt(ws2 / "wmd.tsv", skiprows=1)
    assert wmd.shape[1] == 4
    alarms = json.loads((ws2 / "alarms.json").read_text())
    assert alarms["threshold_b"] > 0


def test_shared_flags_override_config(plant, tmp_path, capsys):
    root, _, common = plant
    args = [common[0], "--config", common[2], "--out", str(tmp_path / "t"), "--threshold", "1e-6"]
    assert cli.main(["select-features", *args]) == 2
    assert "[select-features]" in capsys.readouterr().err


def test_unknown_config_key_rejected(plant, tmp_path, capsys):
    root, _, common = plant
    bad = tmp_path / "bad.yaml"
    bad.write_text("monitor: {window: 3, colour: red}\n")
    assert cli.main(["select-features", common[0], "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "colour" in capsys.readouterr().err


def test_detect_on_unlabelled_series(tmp_path):
    out = tmp_path / "m"
    cli.main(["simulate", "--scenario", "MJD_t_no", "--out", str(out)])
    cfg = tmp_path / "mjd.yaml"
    cfg.write_text("gdcpd: {k: 1, window: 2, restarts: 1, n_candidates: 3, max_lengthscale: 0.01}\n")
    ws = tmp_path / "ws"
    assert cli.main(["detect", str(out / "MJD_t_no_seed0.csv"), "--log", "--config", str(cfg),
                     "--out", str(ws)]) == 0
    res = json.loads((ws / "changepoints.json").read_text())["results"][0]
    assert abs(res["timestamps"][0] - 5.7057) <= 2 * 2 * 0.01
    assert (ws / "score_curve.tsv").exists()


def test_monitor_requires_calibration(tmp_path, plant, capsys):
    _, _, common = plant
    assert cli.main(["monitor", common[0], "--out", str(tmp_path / "empty")]) == 2
    assert "calibrate-threshold" in capsys.readouterr().err
