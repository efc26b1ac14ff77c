"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Runtime budgets are part of every criterion and are asserted together with
the numerical checks.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import record
from earlywarn import data, pipeline, synthetic, wmd
from earlywarn.config import load_config
from earlywarn.experiments import jnr_sweep, scenario_recovery
from earlywarn.gp_regression import derivative_posterior, fit, posterior_mean_cov
from earlywarn.kernels import KernelHyperparams, rbf_eval, rbf_grad_second_arg, rbf_hessian_mixed
from earlywarn.rul import RULNetwork
from oracles import lstm_gradient_errors

CONFIG = Path(__file__).parents[1] / "configs" / "synthetic.yaml"


def rel_err(a, b, floor):
    return float(np.linalg.norm(np.ravel(a) - np.ravel(b)) /
                 max(np.linalg.norm(a), np.linalg.norm(b), floor))


# ----------------------------------------------------------------- 1 kernels

def test_criterion_1_kernel_derivatives():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst_g = worst_h = 0.0
    for _ in range(1000):
        D = int(rng.integers(1, 4))
        s2 = float(rng.uniform(0.1, 5.0))
        ell = float(rng.uniform(0.2, 3.0))
        p = KernelHyperparams(s2, [ell])
        t = rng.uniform(-3, 3, D)
        tp = t + rng.normal(0, ell, D)
        g = rbf_grad_second_arg(t, tp, p)
        H = rbf_hessian_mixed(t, tp, p)
        hg, hh = 1e-5 * ell, 1e-4 * ell
        E = np.eye(D)
        g_fd = np.array([(rbf_eval(t, tp + hg * E[i], p) - rbf_eval(t, tp - hg * E[i], p)) / (2 * hg)
                         for i in range(D)])
        H_fd = np.array([[(rbf_eval(t + hh * E[i], tp + hh * E[j], p)
                           - rbf_eval(t + hh * E[i], tp - hh * E[j], p)
                           - rbf_eval(t - hh * E[i], tp + hh * E[j], p)
                           + rbf_eval(t - hh * E[i], tp - hh * E[j], p)) / (4 * hh * hh)
                          for j in range(D)] for i in range(D)])
        # floors put exact zeros (t = t' or |diff| = l) on the derivative's own scale
        worst_g = max(worst_g, rel_err(g, g_fd, 1e-3 * s2 / ell))
        worst_h = max(worst_h, rel_err(H, H_fd, 1e-3 * s2 / ell**2))
    dt = time.perf_counter() - t0
    ok = worst_g < 1e-5 and worst_h < 1e-4 and dt < 1.0
    record(1, "kernel derivatives vs finite differences", ok,
           f"max rel err grad {worst_g:.2e} (<1e-5), hessian {worst_h:.2e} (<1e-4), 1000 configs", dt)
    assert ok


# ------------------------------------------------------ 2 derivative posterior

def test_criterion_2_derivative_posterior():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    t = np.sort(rng.uniform(0, 10, 50))
    z = np.sin(t) + 0.3 * t + 0.1 * rng.standard_normal(50)
    m = fit(t, z, restarts=3, seed=0)
    tq = rng.uniform(0.5, 9.5, 20)
    h = 1e-5
    fd = (posterior_mean_cov(m, tq + h)[0] - posterior_mean_cov(m, tq - h)[0]) / (2 * h)
    err = float(np.max(np.abs(derivative_posterior(m, tq).mean - fd)))
    dt = time.perf_counter() - t0
    ok = err < 1e-4 and dt < 5.0
    record(2, "derivative posterior vs finite differences of the mean", ok,
           f"max abs err {err:.2e} (<1e-4) at 20 queries, 50-point fit", dt)
    assert ok


# --------------------------------------------------------- 3 scenario recovery

@pytest.mark.slow
def test_criterion_3_scenario_recovery():
    t0 = time.perf_counter()
    results = scenario_recovery(replications=20)
    dt = time.perf_counter() - t0
    rates = {r.scenario: r.rate for r in results}
    ok = len(results) == 7 and all(v >= 0.8 for v in rates.values()) and dt < 600
    detail = ", ".join(f"{k} {v:.2f}" for k, v in rates.items())
    record(3, "scenario recovery within 2A*dt in >=80% of 20 runs", ok, detail, dt)
    assert ok


# ---------------------------------------------------------------- 4 JNR trend

@pytest.mark.slow
def test_criterion_4_jnr_trend():
    t0 = time.perf_counter()
    res = jnr_sweep((0.02, 0.05, 0.1, 0.2), replications=20)
    dt = time.perf_counter() - t0
    rho = res.rank_correlation
    ok = (np.isnan(rho) or rho <= 0) and res.inversions <= 1 and dt < 600
    med = ", ".join(f"{j:.3f}:{m:.4f}" for j, m in zip(res.jnr, res.median_errors))
    record(4, "median error non-increasing in JNR", ok,
           f"JNR:median {med}; rank corr {rho:.2f}, inversions {res.inversions}", dt)
    assert ok


# -------------------------------------------------------------- 5 WMD algebra

def test_criterion_5_wmd_algebra():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    bitwise = scaling = zero_w = True
    for _ in range(200):
        D = int(rng.integers(1, 6))
        A = rng.standard_normal((D, D))
        ci = np.linalg.inv(A @ A.T + D * np.eye(D))
        ci = 0.5 * (ci + ci.T)
        o, z = rng.normal(0, 3, D), rng.normal(0, 3, D)
        bitwise &= wmd.weighted_mahalanobis(o, z, np.eye(D), ci) == wmd.mahalanobis(o, z, ci)
        w = rng.random(D)
        c = float(rng.uniform(0.01, 100))
        base = wmd.weighted_mahalanobis(o, z, w, ci)
        scaling &= math.isclose(wmd.weighted_mahalanobis(o, z, c * w, ci), c * base,
                                rel_tol=1e-12, abs_tol=1e-12)
        w0 = w.copy()
        j = int(rng.integers(D))
        w0[j] = 0.0
        o2 = o.copy()
        o2[j] += rng.normal(0, 50)
        zero_w &= wmd.weighted_mahalanobis(o, z, w0, ci) == wmd.weighted_mahalanobis(o2, z, w0, ci)
    example = wmd.mahalanobis([1.0, 1.0], [0.0, 0.0], np.linalg.inv([[1.0, 0.5], [0.5, 1.0]]))
    ex_err = abs(example - math.sqrt(4 / 3))
    dt = time.perf_counter() - t0
    ok = bitwise and scaling and zero_w and ex_err < 1e-12 and dt < 1.0
    record(5, "WMD algebra", ok,
           f"W=I bitwise {bitwise}, cW scaling {scaling}, zero weight {zero_w}, "
           f"sqrt(4/3) err {ex_err:.1e}", dt)
    assert ok


# ------------------------------------------------------------- 6 stopping rule

def test_criterion_6_stopping_rule():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    monotone = True
    for _ in range(1000):
        s = rng.exponential(1.0, int(rng.integers(1, 80)))
        b1, b2 = np.sort(rng.uniform(0, 4, 2))
        e1, e2 = wmd.stopping_time(s, b1), wmd.stopping_time(s, b2)
        if e2 is not None:
            monotone &= e1 is not None and e1.time_index <= e2.time_index
        if e1 is not None:
            monotone &= e1.wmd_value >= b1
    consistent = True
    for _ in range(50):
        D, A = int(rng.integers(1, 5)), int(rng.integers(1, 6))
        x = rng.standard_normal((int(rng.integers(2 * A, 60)), D))
        B = rng.standard_normal((D, D))
        ci = np.linalg.inv(B @ B.T + D * np.eye(D))
        mc = wmd.MonitorConfig(A, wmd.derivative_weights(rng.random(D) + 0.1), 0.5 * (ci + ci.T))
        consistent &= np.array_equal(wmd.online_wmd_series(x, mc), wmd.segment_wmd(x, mc))
    dt = time.perf_counter() - t0
    ok = monotone and consistent and dt < 5.0
    record(6, "stopping rule monotone in b; offline == online", ok,
           f"monotone over 1000 series {monotone}, exact replay equality {consistent}", dt)
    assert ok


# ------------------------------------------------------------ 7 LSTM gradients

def test_criterion_7_lstm_gradients():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        net = RULNetwork.init(3, hidden_size=8, n_layers=2, dropout_rate=0.2, seed=seed)
        X = rng.standard_normal((2, 12, 3))
        Y = rng.random((2, 12))
        worst = max(worst, float(lstm_gradient_errors(net, X, Y).max()))
    dt = time.perf_counter() - t0
    ok = worst < 1e-4 and dt < 30
    record(7, "LSTM gradients vs finite differences", ok,
           f"max rel err {worst:.2e} (<1e-4), 2 layers, hidden 8, length 12, 10 seeds", dt)
    assert ok


# ----------------------------------------------------------- 8 end-to-end

@pytest.mark.slow
def test_criterion_8_end_to_end():
    t0 = time.perf_counter()
    cfg = load_config(CONFIG)
    raw, truth = synthetic.make_cycles(synthetic.SyntheticSpec(n_cycles=20, n_features=12), seed=0)
    ds = data.preprocess(raw, cfg.data.restart_exclusion_s, cfg.data.interpolate, split=cfg.data.split)
    tr, va, te = data.split(ds, cfg.data.split)
    bundle = pipeline.run_offline(tr, va, cfg)
    outcomes = pipeline.run_online(te, bundle, cfg)
    rmse = pipeline.evaluate(outcomes)["aggregate"]["rmse"]
    plain = pipeline.train_plain_lstm(tr, va, cfg)
    const = pipeline.constant_baseline(tr, bundle, cfg)
    base = pipeline.baseline_predictions(te, outcomes, plain, const, cfg.monitor.window)
    dt = time.perf_counter() - t0

    a = set(truth.planted) <= set(bundle.selected)
    early = [o.lead_minutes is not None and o.lead_minutes >= 6.0 for o in outcomes]
    b = np.mean(early) >= 0.8
    c = rmse is not None and rmse < base["constant"] and rmse < base["plain_lstm"]
    ok = a and b and c and dt < 900
    leads = [None if o.lead_minutes is None else round(o.lead_minutes) for o in outcomes]
    record(8, "end-to-end synthetic pipeline", ok,
           f"(a) selected {bundle.selected} vs planted {list(truth.planted)}: {a}; "
           f"(b) leads {leads} min, {np.mean(early):.0%} >= 6 min: {b}; "
           f"(c) RMSE {rmse:.4f} vs constant {base['constant']:.4f}, "
           f"plain LSTM {base['plain_lstm']:.4f}: {c}", dt)
    assert ok


# --------------------------------------------------------------- 9 sweep

@pytest.mark.slow
def test_criterion_9_parameter_sweep():
    t0 = time.perf_counter()
    cfg = load_config(CONFIG)
    raw, _ = synthetic.make_cycles(seed=0)
    ds = data.preprocess(raw, cfg.data.restart_exclusion_s, cfg.data.interpolate, split=cfg.data.split)
    tr, va, te = data.split(ds, cfg.data.split)
    res = pipeline.parameter_sweep(tr, va, te, cfg, (0.3, 0.45, 0.6), (4, 6, 8, 10))
    dt = time.perf_counter() - t0
    default = res.cell(0.45, 6)
    rm, sf = res.grid("rmse"), res.grid("sf")
    ok = (res.complete and rm.shape == (3, 4) and np.all(np.isfinite(rm)) and np.all(np.isfinite(sf))
          and default.complete and default.window_A == 3 and dt < 1200)
    rows = "; ".join(f"th {th}: " + " ".join(f"{v:.3f}" for v in rm[i])
                     for i, th in enumerate(res.thresholds))
    record(9, "threshold x window sweep", ok,
           f"complete {res.complete}; RMSE rows over windows 4/6/8/10 min: {rows}; "
           f"default (0.45, 6 min) status {default.status}, RMSE {default.rmse:.3f}, SF {default.sf:.4f}",
           dt)
    assert ok
