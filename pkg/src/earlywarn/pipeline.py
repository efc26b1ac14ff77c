"""Offline model building and online replay.

Offline: ARD classification picks features, per-window GP derivatives
locate the precursor change in every training cycle, the change
neighbourhoods give the WMD weights, healthy rows give the covariance and
the pre-breakdown windows give the alarm threshold; an LSTM then learns
RUL from the hour before each alarm onward.

Online: each test cycle is replayed through the monitor; at the first alarm
the RUL network is calibrated on the preceding hour and predicts RUL every
step until the stop mark.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import changepoint, gp_classification, wmd
from . import rul as rulmod
from .config import PipelineConfig, stage_rng, stage_seed
from .data import TimeSeriesDataset

log = logging.getLogger(__name__)

BUNDLE_SCHEMA = "earlywarn.bundle/1"


class StageError(RuntimeError):
    """A pipeline stage failed; the message names the stage."""


class CompatibilityError(ValueError):
    pass


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(f"[{name}] {type(exc).__name__}: {exc}") from exc
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner
    return wrap


# ---------------------------------------------------------------- cycle views

@dataclass
class CycleView:
    """Rows of one cycle with the bookkeeping the stages need."""

    rows: np.ndarray          # indices into the parent dataset
    valid: np.ndarray         # rows not excluded (subset of ``rows``)
    failed: bool

    def failure_time(self, ds: TimeSeriesDataset) -> float:
        return float(ds.timestamps[self.rows[-1]])


def cycle_views(ds: TimeSeriesDataset) -> list:
    out = []
    for rows in ds.cycles():
        valid = rows[~ds.exclusion_mask[rows]]
        failed = ds.labels is not None and ds.labels[rows[-1]] == 1
        out.append(CycleView(rows, valid, bool(failed)))
    return out


def pre_failure_window(ds: TimeSeriesDataset, cyc: CycleView, W: int) -> np.ndarray:
    """The last ``W`` valid rows of a failed cycle."""
    return cyc.valid[-W:]


# ------------------------------------------------------------- offline stages

def classification_data(ds: TimeSeriesDataset, W: int, max_points: int, rng):
    """Rows labelled 1 inside pre-breakdown windows, 0 elsewhere; balanced subsample."""
    pos, neg = [], []
    for cyc in cycle_views(ds):
        if not cyc.failed:
            neg.append(cyc.valid)
            continue
        win = pre_failure_window(ds, cyc, W)
        pos.append(win)
        neg.append(np.setdiff1d(cyc.valid, win))
    pos = np.concatenate(pos) if pos else np.empty(0, int)
    neg = np.concatenate(neg) if neg else np.empty(0, int)
    n_pos = min(pos.size, max_points // 2)
    n_neg = min(neg.size, max_points - n_pos)
    rows = np.sort(np.concatenate([rng.choice(pos, n_pos, replace=False),
                                   rng.choice(neg, n_neg, replace=False)]))
    y = np.isin(rows, pos).astype(int)
    return ds.features[rows], y


@_stage("select-features")
def select_stage(train: TimeSeriesDataset, cfg: PipelineConfig):
    rng = stage_rng(cfg.seeds.root, "classification-subsample")
    X, y = classification_data(train, cfg.data.window_samples, cfg.features.max_points, rng)
    model = gp_classification.fit_laplace(X, y, restarts=cfg.features.restarts,
                                          seed=stage_seed(cfg.seeds.root, "classification"))
    ls = model.params.length_scales
    selected = gp_classification.select_features(ls, cfg.features.threshold)
    if not selected:
        raise ValueError(f"no feature has length-scale below {cfg.features.threshold}; "
                         f"smallest is {ls.min():.3g}")
    return selected, ls


@_stage("detect")
def detect_stage(train: TimeSeriesDataset, selected: list, cfg: PipelineConfig,
                 gradient_cache: dict | None = None):
    """GDCPD on each training cycle's pre-breakdown window.

    Returns (results, per-window derivative means, GP model dicts).  The GP
    fits depend only on the selected columns, so a ``gradient_cache`` dict
    lets parameter sweeps reuse them across window sizes.
    """
    W = cfg.data.window_samples
    g = cfg.gdcpd
    seed = stage_seed(cfg.seeds.root, "gdcpd")
    key = tuple(selected)
    cached = None if gradient_cache is None else gradient_cache.get(key)
    results, grads_all, models_all = [], [], []
    failed = [c for c in cycle_views(train) if c.failed]
    if not failed:
        raise ValueError("training split has no failed cycles")
    for j, cyc in enumerate(failed):
        win = pre_failure_window(train, cyc, W)
        t = train.timestamps[win]
        x = train.features[np.ix_(win, selected)]
        if cached is None:
            grads, models = changepoint.fit_gradients(t, x, seed=seed, restarts=g.restarts,
                                                      max_lengthscale=g.max_lengthscale,
                                                      min_lengthscale=g.min_lengthscale)
            models = [m.to_dict() for m in models]
        else:
            grads, models = cached[0][j], cached[1][j]
        res = changepoint.detect_from_gradients(x, grads, g.k, g.window, timestamps=t,
                                                n_candidates=g.n_candidates)
        res.features = list(selected)
        results.append(res)
        grads_all.append(grads)
        models_all.append(models)
    if gradient_cache is not None:
        gradient_cache[key] = (grads_all, models_all)
    return results, grads_all, models_all


def change_weights(results, grads_all, A: int) -> np.ndarray:
    """Mean |grad mu| over [tau - A, tau + A] across windows, normalized."""
    acc = []
    for res, g in zip(results, grads_all):
        for tau in res.changepoints:
            lo, hi = max(0, tau - A), min(g.shape[0], tau + A + 1)
            acc.append(np.abs(g[lo:hi]).mean(axis=0))
    return wmd.derivative_weights(np.mean(acc, axis=0))


def healthy_rows(ds: TimeSeriesDataset, W: int) -> np.ndarray:
    rows = []
    for cyc in cycle_views(ds):
        rows.append(np.setdiff1d(cyc.valid, pre_failure_window(ds, cyc, W)) if cyc.failed
                    else cyc.valid)
    return np.concatenate(rows)


@_stage("calibrate-threshold")
def monitor_stage(train: TimeSeriesDataset, selected: list, weights, cfg: PipelineConfig):
    W = cfg.data.window_samples
    cov_inv = wmd.estimate_cov_inv(train.features[np.ix_(healthy_rows(train, W), selected)],
                                   ridge=cfg.monitor.ridge)
    mc = wmd.MonitorConfig(cfg.monitor.window, weights, cov_inv)
    segs = [train.features[np.ix_(pre_failure_window(train, c, W), selected)]
            for c in cycle_views(train) if c.failed]
    mc.threshold_b = wmd.offline_threshold(segs, mc)
    return mc


@dataclass
class CycleReplay:
    """Monitor replay of one cycle; ``wmd`` is 0 before warm-up completes."""

    rows: np.ndarray
    wmd: np.ndarray
    alarm_pos: int | None       # position within ``rows``
    alarm_value: float | None


def replay_cycle(ds: TimeSeriesDataset, cyc: CycleView, selected: list,
                 mc: wmd.MonitorConfig) -> CycleReplay:
    mon = wmd.OnlineMonitor(mc)
    vals = np.zeros(cyc.valid.size)
    for j, r in enumerate(cyc.valid):
        v = mon.update(ds.features[r, selected])
        vals[j] = 0.0 if v is None else v
    if mon.alarm is None:
        return CycleReplay(cyc.valid, vals, None, None)
    return CycleReplay(cyc.valid, vals, mon.alarm.time_index, mon.alarm.wmd_value)


def rul_inputs(ds: TimeSeriesDataset, rep: CycleReplay, selected: list, origin: int,
               start: int, A: int) -> np.ndarray:
    """Per-row LSTM inputs: selected features, minutes relative to the alarm, WMD.

    ``origin`` is the alarm position within ``rep.rows``; rows before it get
    negative times.  Features are taken relative to their mean over the
    ``A`` rows from ``start``, which removes the cycle's operating point.
    """
    t = ds.timestamps[rep.rows]
    since = (t - t[origin]) / 60.0
    feats = ds.features[np.ix_(rep.rows, selected)]
    feats = feats - feats[start:start + A].mean(axis=0)
    return np.column_stack([feats, since, rep.wmd])


def rul_targets(ds: TimeSeriesDataset, rows, cfg: PipelineConfig) -> np.ndarray:
    """Normalized RUL, min(minutes to failure / horizon, 1)."""
    t = ds.timestamps[rows]
    minutes = (t[-1] - t) / 60.0
    return np.minimum(minutes / cfg.rul.horizon_minutes, 1.0)


def _stop_pos(ds, rows, cfg) -> int:
    """Last position whose RUL is still at least the stop mark."""
    t = ds.timestamps[rows]
    ok = np.flatnonzero((t[-1] - t) / 60.0 >= cfg.rul.stop_minutes - 1e-9)
    return int(ok[-1]) if ok.size else -1


def training_sequences(ds: TimeSeriesDataset, selected, mc, cfg, anchors=None):
    """One sequence per failed cycle: from an hour before the first alarm to the stop mark.

    Cycles that never alarm fall back to ``anchors`` (position of the
    detected change plus A), if given, else they are skipped.
    """
    W = cfg.data.window_samples
    seqs, targets = [], []
    for ci, cyc in enumerate(c for c in cycle_views(ds) if c.failed):
        rep = replay_cycle(ds, cyc, selected, mc)
        a = rep.alarm_pos
        if a is None and anchors is not None:
            a = anchors[ci]
        stop = _stop_pos(ds, rep.rows, cfg)
        if a is None or a > stop:
            continue
        start = max(0, a - W)
        X = rul_inputs(ds, rep, selected, a, start, mc.window_A)
        y = rul_targets(ds, rep.rows, cfg)
        seqs.append(X[start:stop + 1])
        targets.append(y[start:stop + 1])
    return seqs, targets


def _fit_input_norm(net: rulmod.RULNetwork, seqs):
    allx = np.vstack(seqs)
    net.x_mean = allx.mean(axis=0)
    sd = allx.std(axis=0)
    net.x_std = np.where(sd > 1e-12, sd, 1.0)


@_stage("train-rul")
def rul_stage(train, validation, selected, mc, cfg: PipelineConfig, anchors=None):
    seqs, targets = training_sequences(train, selected, mc, cfg, anchors)
    if not seqs:
        raise ValueError("no training sequences (no alarms and no anchors)")
    vseqs, vtargets = training_sequences(validation, selected, mc, cfg)
    if not vseqs:
        vseqs, vtargets = None, None
    r = cfg.rul
    net = rulmod.RULNetwork.init(len(selected) + 2, r.hidden, r.layers, r.dropout,
                                 seed=stage_seed(cfg.seeds.root, "rul-init"),
                                 input_spec=[f"f{i}" for i in selected] + ["minutes_since_alarm", "wmd"])
    _fit_input_norm(net, seqs)
    tc = rulmod.TrainConfig(r.epochs, r.lr, r.batch_size, r.clip_norm,
                            stage_seed(cfg.seeds.root, "rul-train"))
    net, hist = rulmod.train(net, seqs, targets, vseqs, vtargets, tc)
    return net, hist


# ----------------------------------------------------------------- the bundle

@dataclass
class ModelBundle:
    feature_names: list
    standardization: np.ndarray
    selected: list
    lengthscales: np.ndarray
    gp_models: list
    changepoints: list
    monitor: wmd.MonitorConfig
    network: rulmod.RULNetwork
    config: dict
    history: dict = field(default_factory=dict)
    schema: str = BUNDLE_SCHEMA

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "feature_names": list(self.feature_names),
            "standardization": np.asarray(self.standardization).tolist(),
            "selected": [int(i) for i in self.selected],
            "lengthscales": np.asarray(self.lengthscales).tolist(),
            "gp_models": self.gp_models,
            "changepoints": [c.to_dict() for c in self.changepoints],
            "monitor": self.monitor.to_dict(),
            "network": self.network.to_dict(),
            "config": self.config,
            "history": {k: [float(v) for v in vals] for k, vals in self.history.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelBundle":
        if d.get("schema") != BUNDLE_SCHEMA:
            raise ValueError(f"unsupported bundle schema {d.get('schema')!r}")
        cps = []
        for c in d["changepoints"]:
            mdc = np.array([np.nan if v is None else v for v in c["mean_diff_curve"]])
            cps.append(changepoint.ChangePointResult(
                c["changepoints"], c["timestamps"], np.array(c["score_curve"]), mdc,
                [np.array(a) for a in c["attributions"]], c["window"], c["truncated"],
                c["features"]))
        return cls(d["feature_names"], np.array(d["standardization"]), d["selected"],
                   np.array(d["lengthscales"]), d["gp_models"], cps,
                   wmd.MonitorConfig.from_dict(d["monitor"]),
                   rulmod.RULNetwork.from_dict(d["network"]), d["config"], d.get("history", {}))

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()


def save_bundle(bundle: ModelBundle, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    text = bundle.serialize()
    (directory / "bundle.json").write_text(text)
    manifest = {"schema": BUNDLE_SCHEMA, "files": {"bundle.json": hashlib.sha256(
        text.encode()).hexdigest()}}
    (directory / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1))
    return directory


def load_bundle(directory) -> ModelBundle:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("schema") != BUNDLE_SCHEMA:
        raise ValueError(f"unsupported bundle schema {manifest.get('schema')!r}")
    text = (directory / "bundle.json").read_text()
    if hashlib.sha256(text.encode()).hexdigest() != manifest["files"]["bundle.json"]:
        raise ValueError("bundle.json does not match its manifest digest")
    return ModelBundle.from_dict(json.loads(text))


# ----------------------------------------------------------- offline / online

def anchors_from_changepoints(train: TimeSeriesDataset, results, cfg) -> list:
    """Change position in cycle coordinates (+A for the online lag)."""
    W = cfg.data.window_samples
    out = []
    failed = [c for c in cycle_views(train) if c.failed]
    for cyc, res in zip(failed, results):
        offset = cyc.valid.size - min(W, cyc.valid.size)
        out.append(offset + res.changepoints[0] + cfg.monitor.window if res.changepoints else None)
    return out


def run_offline(train: TimeSeriesDataset, validation: TimeSeriesDataset,
                cfg: PipelineConfig, lengthscales=None, gradient_cache: dict | None = None
                ) -> ModelBundle:
    """Build the full model bundle from preprocessed train/validation splits.

    Passing ``lengthscales`` from an earlier classifier fit skips the fit
    and only applies the configured threshold.
    """
    if lengthscales is None:
        selected, ls = select_stage(train, cfg)
    else:
        ls = np.asarray(lengthscales, dtype=float)
        selected = gp_classification.select_features(ls, cfg.features.threshold)
        if not selected:
            raise StageError(f"[select-features] no feature has length-scale below "
                             f"{cfg.features.threshold}; smallest is {ls.min():.3g}")
    log.info("selected features %s", selected)
    results, grads, models = detect_stage(train, selected, cfg, gradient_cache)
    weights = change_weights(results, grads, cfg.monitor.window)
    mc = monitor_stage(train, selected, weights, cfg)
    log.info("threshold b = %.4f", mc.threshold_b)
    anchors = anchors_from_changepoints(train, results, cfg)
    net, hist = rul_stage(train, validation, selected, mc, cfg, anchors)
    return ModelBundle(list(train.feature_names), train.standardization, selected, ls, models,
                       results, mc, net, cfg.to_dict(), hist)


@dataclass
class CycleOutcome:
    cycle: int
    failure_time: float
    alarm_time: float | None
    lead_minutes: float | None
    wmd_times: np.ndarray
    wmd: np.ndarray
    rul_times: np.ndarray
    rul_pred: np.ndarray
    rul_true: np.ndarray

    @property
    def missed(self) -> bool:
        return self.alarm_time is None


def _check_compat(ds: TimeSeriesDataset, bundle: ModelBundle):
    if list(ds.feature_names) != list(bundle.feature_names):
        raise CompatibilityError(
            f"stream features {ds.feature_names} differ from bundle features {bundle.feature_names}")


def run_online(test: TimeSeriesDataset, bundle: ModelBundle, cfg: PipelineConfig | None = None,
               calibrate: bool = True) -> list:
    """Replay every test cycle; returns a :class:`CycleOutcome` per cycle."""
    _check_compat(test, bundle)
    cfg = cfg or PipelineConfig.from_dict(bundle.config)
    W = cfg.data.window_samples
    sel = bundle.selected
    out = []
    for ci, cyc in enumerate(cycle_views(test)):
        rep = replay_cycle(test, cyc, sel, bundle.monitor)
        t = test.timestamps[rep.rows]
        fail_t = float(test.timestamps[cyc.rows[-1]])
        empty = np.empty(0)
        if rep.alarm_pos is None:
            out.append(CycleOutcome(ci, fail_t, None, None, t, rep.wmd, empty, empty, empty))
            continue
        a = rep.alarm_pos
        alarm_t = float(t[a])
        stop = _stop_pos(test, rep.rows, cfg)
        start = max(0, a - W)
        X = rul_inputs(test, rep, sel, a, start, bundle.monitor.window_A)
        y = rul_targets(test, rep.rows, cfg)
        net = bundle.network
        if calibrate and a > start:
            net = rulmod.calibrate(net, X[start:a], y[start:a], cfg.rul.calib_epochs,
                                   cfg.rul.lr, cfg.rul.calib_lr_scale,
                                   seed=stage_seed(cfg.seeds.root, f"calibrate-{ci}"))
        if stop >= a:
            pred = rulmod.forward(net, X[start:stop + 1], "infer")[a - start:]
            rt, rp, ra = t[a:stop + 1], pred, y[a:stop + 1]
        else:
            rt, rp, ra = empty, empty, empty
        out.append(CycleOutcome(ci, fail_t, alarm_t, (fail_t - alarm_t) / 60.0, t, rep.wmd,
                                rt, rp, ra))
    return out


def evaluate(outcomes: list) -> dict:
    """Per-cycle and pooled RMSE / score function, plus alarm bookkeeping."""
    if not outcomes:
        raise ValueError("no outcomes to evaluate")
    per = []
    for o in outcomes:
        row = {"cycle": o.cycle, "alarm": not o.missed, "lead_minutes": o.lead_minutes,
               "n_points": int(o.rul_pred.size), "rmse": None, "sf": None}
        if o.rul_pred.size:
            row["rmse"] = rulmod.rmse(o.rul_pred, o.rul_true)
            row["sf"] = rulmod.score_function(o.rul_pred, o.rul_true)
        per.append(row)
    scored = [o for o in outcomes if o.rul_pred.size]
    agg = {"cycles": len(outcomes), "alarms": sum(r["alarm"] for r in per),
           "misses": sum(not r["alarm"] for r in per),
           "points": sum(r["n_points"] for r in per), "rmse": None, "sf": None}
    if scored:
        p = np.concatenate([o.rul_pred for o in scored])
        a = np.concatenate([o.rul_true for o in scored])
        agg["rmse"] = rulmod.rmse(p, a)
        agg["sf"] = rulmod.score_function(p, a)
    return {"per_cycle": per, "aggregate": agg}


# ---------------------------------------------------------------- baselines

def _baseline_inputs(ds: TimeSeriesDataset, rows, A: int) -> np.ndarray:
    # same re-centring as the main model, anchored at the cycle start
    t = ds.timestamps[rows]
    feats = ds.features[rows] - ds.features[rows[:A]].mean(axis=0)
    return np.column_stack([feats, (t - t[0]) / 60.0])


def _full_cycle_sequences(ds: TimeSeriesDataset, cfg: PipelineConfig):
    seqs, targets = [], []
    for cyc in cycle_views(ds):
        if not cyc.failed:
            continue
        stop = _stop_pos(ds, cyc.valid, cfg)
        if stop < 0:
            continue
        seqs.append(_baseline_inputs(ds, cyc.valid, cfg.monitor.window)[:stop + 1])
        targets.append(rul_targets(ds, cyc.valid, cfg)[:stop + 1])
    return seqs, targets


@_stage("baseline")
def train_plain_lstm(train: TimeSeriesDataset, validation: TimeSeriesDataset,
                     cfg: PipelineConfig) -> rulmod.RULNetwork:
    """LSTM on all features plus elapsed time, full cycles, no change-point or WMD input."""
    seqs, targets = _full_cycle_sequences(train, cfg)
    if not seqs:
        raise ValueError("no failed training cycles")
    vseqs, vtargets = _full_cycle_sequences(validation, cfg)
    r = cfg.rul
    net = rulmod.RULNetwork.init(train.n_features + 1, r.hidden, r.layers, r.dropout,
                                 seed=stage_seed(cfg.seeds.root, "baseline-init"),
                                 input_spec=list(train.feature_names) + ["elapsed_min"])
    _fit_input_norm(net, seqs)
    tc = rulmod.TrainConfig(r.epochs, r.lr, r.batch_size, r.clip_norm,
                            stage_seed(cfg.seeds.root, "baseline-train"))
    net, _ = rulmod.train(net, seqs, targets, vseqs or None, vtargets or None, tc)
    return net


def baseline_predictions(test: TimeSeriesDataset, outcomes: list, net: rulmod.RULNetwork,
                         constant: float, A: int) -> dict:
    """Predictions of both baselines at exactly the points the main model was scored on."""
    plain, const, actual = [], [], []
    for cyc, o in zip(cycle_views(test), outcomes):
        if not o.rul_pred.size:
            continue
        t = test.timestamps[cyc.valid]
        pos = np.searchsorted(t, o.rul_times)
        pred = rulmod.forward(net, _baseline_inputs(test, cyc.valid, A)[:pos[-1] + 1], "infer")
        plain.append(pred[pos])
        const.append(np.full(pos.size, constant))
        actual.append(o.rul_true)
    if not actual:
        return {"plain_lstm": None, "constant": None}
    a = np.concatenate(actual)
    return {"plain_lstm": rulmod.rmse(np.concatenate(plain), a),
            "constant": rulmod.rmse(np.concatenate(const), a)}


def constant_baseline(train: TimeSeriesDataset, bundle: ModelBundle, cfg: PipelineConfig) -> float:
    """Mean training RUL target over the same post-alarm regime the main model learns."""
    _, targets = training_sequences(train, bundle.selected, bundle.monitor, cfg)
    if not targets:
        raise ValueError("no training sequences for the constant baseline")
    return float(np.mean(np.concatenate(targets)))


# ---------------------------------------------------------- parameter sweep

@dataclass
class SweepCell:
    threshold: float
    window_minutes: float
    window_A: int
    status: str                  # "ok", or the stage error that stopped the cell
    n_selected: int = 0
    alarms: int = 0
    misses: int = 0
    rmse: float | None = None
    sf: float | None = None

    @property
    def complete(self) -> bool:
        return (self.status == "ok" and self.rmse is not None and self.sf is not None
                and np.isfinite(self.rmse) and np.isfinite(self.sf))


@dataclass
class SweepResult:
    thresholds: list
    windows_minutes: list
    cells: list

    def cell(self, threshold: float, window_minutes: float) -> SweepCell:
        for c in self.cells:
            if np.isclose(c.threshold, threshold) and np.isclose(c.window_minutes, window_minutes):
                return c
        raise KeyError((threshold, window_minutes))

    @property
    def complete(self) -> bool:
        return (len(self.cells) == len(self.thresholds) * len(self.windows_minutes)
                and all(c.complete for c in self.cells))

    def best(self) -> SweepCell:
        """Lowest RMSE among complete cells, SF breaking ties."""
        done = [c for c in self.cells if c.complete]
        if not done:
            raise ValueError("no complete cells")
        return min(done, key=lambda c: (c.rmse, c.sf))

    def grid(self, metric: str) -> np.ndarray:
        """(thresholds x windows) array of ``metric``; NaN where a cell failed."""
        out = np.full((len(self.thresholds), len(self.windows_minutes)), np.nan)
        for c in self.cells:
            i = int(np.argmin(np.abs(np.asarray(self.thresholds) - c.threshold)))
            j = int(np.argmin(np.abs(np.asarray(self.windows_minutes) - c.window_minutes)))
            v = getattr(c, metric)
            out[i, j] = np.nan if v is None else v
        return out

    def to_dict(self) -> dict:
        return {"thresholds": [float(v) for v in self.thresholds],
                "windows_minutes": [float(v) for v in self.windows_minutes],
                "cells": [{k: (float(v) if isinstance(v, (float, np.floating)) else v)
                           for k, v in c.__dict__.items()} for c in self.cells]}


def parameter_sweep(train: TimeSeriesDataset, validation: TimeSeriesDataset,
                    test: TimeSeriesDataset, cfg: PipelineConfig,
                    thresholds=(0.3, 0.45, 0.6), windows_minutes=(4, 6, 8, 10)) -> SweepResult:
    """Offline + online run for every (relevance threshold, window) pair.

    The window sets A for both GDCPD and the monitor.  The classifier and
    the per-feature GP fits do not depend on either swept parameter, so
    they are computed once and shared.  A cell whose pipeline stops (for
    example, no feature passes the threshold) is kept with its error as
    ``status``.
    """
    _, ls = select_stage(train, cfg)
    cache: dict = {}
    cells = []
    for th in thresholds:
        for wm in windows_minutes:
            A = max(1, int(round(wm * 60.0 / cfg.data.cadence_s)))
            c = cfg.with_overrides(window=A, threshold=th)
            cell = SweepCell(float(th), float(wm), A, "ok")
            try:
                bundle = run_offline(train, validation, c, lengthscales=ls, gradient_cache=cache)
                ev = evaluate(run_online(test, bundle, c))["aggregate"]
            except StageError as exc:
                cell.status = str(exc)
                cells.append(cell)
                log.warning("sweep cell (%s, %s min): %s", th, wm, exc)
                continue
            cell.n_selected = len(bundle.selected)
            cell.alarms, cell.misses = ev["alarms"], ev["misses"]
            cell.rmse, cell.sf = ev["rmse"], ev["sf"]
            if cell.rmse is None:
                cell.status = "no alarms in test cycles"
            cells.append(cell)
    return SweepResult(list(thresholds), list(windows_minutes), cells)
