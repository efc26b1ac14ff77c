import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from earlywarn import data, pipeline, synthetic, wmd
from earlywarn.config import load_config
from earlywarn.data import TimeSeriesDataset
from earlywarn.synthetic import SyntheticSpec

CONFIG = Path(__file__).parents[1] / "configs" / "synthetic.yaml"


def small_config():
    d = load_config(CONFIG).to_dict()
    d["rul"].update(hidden=8, layers=1, epochs=3)
    return type(load_config(CONFIG)).from_dict(d)


def build(raw, cfg):
    ds = data.preprocess(raw, cfg.data.restart_exclusion_s, cfg.data.interpolate, split=cfg.data.split)
    tr, va, te = data.split(ds, cfg.data.split)
    return ds, tr, va, te, pipeline.run_offline(tr, va, cfg)


@pytest.fixture(scope="module")
def fixture10():
    cfg = small_config()
    raw, truth = synthetic.make_cycles(SyntheticSpec(n_cycles=10), seed=0)
    ds, tr, va, te, bundle = build(raw, cfg)
    outcomes = pipeline.run_online(te, bundle, cfg)
    return dict(cfg=cfg, raw=raw, truth=truth, ds=ds, train=tr, val=va, test=te,
                bundle=bundle, outcomes=outcomes)


# ------------------------------------------------------------------ offline

def test_selection_contains_planted(fixture10):
    assert set(fixture10["truth"].planted) <= set(fixture10["bundle"].selected)


def test_threshold_positive(fixture10):
    assert fixture10["bundle"].monitor.threshold_b > 0


def test_one_changepoint_per_training_window(fixture10):
    b = fixture10["bundle"]
    assert len(b.changepoints) == 6
    assert all(len(c.changepoints) == 1 for c in b.changepoints)
    assert abs(b.monitor.weights_W.sum() - 1) < 1e-12


def test_same_seed_gives_hash_equal_bundle(fixture10):
    f = fixture10
    again = pipeline.run_offline(f["train"], f["val"], f["cfg"])
    assert again.digest() == f["bundle"].digest()
    other = pipeline.run_offline(f["train"], f["val"], f["cfg"].with_overrides(seed=1))
    assert other.digest() != f["bundle"].digest()


def test_poisoned_masked_rows_never_reach_a_statistic(fixture10):
    f = fixture10
    raw = f["raw"]
    excl = data.exclusion_after_breaks(raw.timestamps, raw.labels, f["cfg"].data.restart_exclusion_s)
    assert excl.sum() > 0
    X = raw.features.copy()
    X[excl] = 1e9
    poisoned = TimeSeriesDataset(raw.timestamps, X, raw.labels)
    _, _, _, _, bundle = build(poisoned, f["cfg"])
    assert bundle.digest() == f["bundle"].digest()


def test_offline_online_wmd_consistency(fixture10):
    f = fixture10
    tr, b, W = f["train"], f["bundle"], f["cfg"].data.window_samples
    A = b.monitor.window_A
    for cyc in [c for c in pipeline.cycle_views(tr) if c.failed]:
        rep = pipeline.replay_cycle(tr, cyc, b.selected, b.monitor)
        seg = tr.features[np.ix_(pipeline.pre_failure_window(tr, cyc, W), b.selected)]
        off = wmd.segment_wmd(seg, b.monitor)
        start = cyc.valid.size - W + 2 * A - 1
        np.testing.assert_array_equal(rep.wmd[start:], off)


def test_bundle_roundtrip_and_tamper(fixture10, tmp_path):
    b = fixture10["bundle"]
    pipeline.save_bundle(b, tmp_path / "b")
    back = pipeline.load_bundle(tmp_path / "b")
    assert back.digest() == b.digest()
    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert manifest["schema"] == pipeline.BUNDLE_SCHEMA
    text = (tmp_path / "b" / "bundle.json").read_text()
    (tmp_path / "b" / "bundle.json").write_text(text.replace('"selected"', '"selected" ', 1))
    with pytest.raises(ValueError, match="digest"):
        pipeline.load_bundle(tmp_path / "b")


def test_stage_errors_are_labelled(fixture10):
    f = fixture10
    with pytest.raises(pipeline.StageError, match=r"^\[select-features\]"):
        pipeline.run_offline(f["train"], f["val"], f["cfg"].with_overrides(threshold=1e-6))


# ------------------------------------------------------------------- online

def test_alarm_and_rul_trace_stop_at_ten_minutes(fixture10):
    f = fixture10
    cadence_min = f["cfg"].data.cadence_s / 60
    alarmed = [o for o in f["outcomes"] if not o.missed]
    assert alarmed
    for o in alarmed:
        assert o.rul_times.size == o.rul_pred.size == o.rul_true.size > 0
        remaining = (o.failure_time - o.rul_times) / 60
        assert remaining[-1] >= 10 - 1e-9
        assert remaining[-1] - cadence_min < 10
        assert o.rul_times[0] == o.alarm_time


def test_cycle_without_alarm_is_a_miss(fixture10):
    f = fixture10
    mc = replace(f["bundle"].monitor)
    mc.threshold_b = 1e12
    never = replace(f["bundle"], monitor=mc)
    outs = pipeline.run_online(f["test"], never, f["cfg"])
    assert all(o.missed and o.rul_pred.size == 0 and o.lead_minutes is None for o in outs)
    agg = pipeline.evaluate(outs)["aggregate"]
    assert agg["misses"] == len(outs) and agg["alarms"] == 0 and agg["rmse"] is None


def test_report_totals_equal_per_cycle_sums(fixture10):
    rep = pipeline.evaluate(fixture10["outcomes"])
    per, agg = rep["per_cycle"], rep["aggregate"]
    assert agg["cycles"] == len(per)
    assert agg["alarms"] == sum(r["alarm"] for r in per)
    assert agg["misses"] == sum(not r["alarm"] for r in per)
    assert agg["points"] == sum(r["n_points"] for r in per)


def test_feature_mismatch_is_rejected(fixture10):
    f = fixture10
    te = f["test"]
    bad = replace(te, feature_names=list(reversed(te.feature_names)))
    with pytest.raises(pipeline.CompatibilityError):
        pipeline.run_online(bad, f["bundle"], f["cfg"])


def test_evaluate_perfect_and_empty():
    t = np.arange(5.0)
    y = np.linspace(1, 0.2, 5)
    o = pipeline.CycleOutcome(0, 10.0, 0.0, 10.0, t, np.zeros(5), t, y, y)
    agg = pipeline.evaluate([o])["aggregate"]
    assert agg["rmse"] == 0.0 and agg["sf"] == 0.0
    with pytest.raises(ValueError):
        pipeline.evaluate([])


def test_baselines_score_the_same_points(fixture10):
    f = fixture10
    net = pipeline.train_plain_lstm(f["train"], f["val"], f["cfg"])
    const = pipeline.constant_baseline(f["train"], f["bundle"], f["cfg"])
    assert 0 < const < 1
    res = pipeline.baseline_predictions(f["test"], f["outcomes"], net, const,
                                        f["cfg"].monitor.window)
    assert res["plain_lstm"] >= 0 and res["constant"] >= 0


# -------------------------------------------------------------------- sweep

def test_sweep_result_bookkeeping():
    cells = [pipeline.SweepCell(0.3, 4, 2, "ok", 3, 2, 0, 0.2, 0.01),
             pipeline.SweepCell(0.3, 6, 3, "ok", 3, 2, 0, 0.1, 0.02),
             pipeline.SweepCell(0.45, 4, 2, "[select-features] nothing", 0),
             pipeline.SweepCell(0.45, 6, 3, "ok", 4, 2, 0, 0.1, 0.01)]
    res = pipeline.SweepResult([0.3, 0.45], [4, 6], cells)
    assert not res.complete
    assert res.best() is cells[3]
    g = res.grid("rmse")
    assert g.shape == (2, 2) and np.isnan(g[1, 0]) and g[0, 1] == 0.1
    assert res.cell(0.45, 6).n_selected == 4
    assert json.dumps(res.to_dict())
