"""Command-line interface.

Every subcommand reads a CSV (``time,y,x1..xD``) and writes into a
workspace directory (``--out``).  Stages reuse artifacts an earlier stage
left in the workspace and compute whatever is missing, so
``select-features -> detect -> calibrate-threshold -> train-rul`` and a
single ``run-offline`` produce the same files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, changepoint, data, gp_classification, mjd, pipeline, synthetic, wmd
from .config import ConfigError, PipelineConfig, load_config, stage_seed

log = logging.getLogger("earlywarn")

FEATURES = "features.json"
CHANGEPOINTS = "changepoints.json"
MONITOR = "monitor.json"
NETWORK = "network.json"
BUNDLE = "bundle"
ONLINE = "online"
REPORT = "report"


# ------------------------------------------------------------------ helpers

def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=1))


def _read_json(path: Path):
    return json.loads(path.read_text())


def _write_columns(path: Path, names, columns):
    """Tab-separated column file with a header row, for external plotting."""
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.column_stack([np.asarray(c, dtype=float) for c in columns]) if columns else np.empty((0, 0))
    np.savetxt(path, arr, delimiter="\t", header="\t".join(names), comments="", fmt="%.10g")


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config)
    if getattr(args, "data", None):
        d = cfg.to_dict()
        d["data"]["path"] = str(args.data)
        cfg = PipelineConfig.from_dict(d)
    return cfg.with_overrides(seed=args.seed, window=args.window, k=args.k,
                              threshold=args.threshold)


def _data_path(args, cfg) -> Path:
    path = args.data or cfg.data.path
    if not path:
        raise ConfigError("no input CSV: pass a path or set data.path in the config")
    return Path(path)


def _splits(args, cfg):
    raw = data.load_csv(_data_path(args, cfg))
    ds = data.preprocess(raw, cfg.data.restart_exclusion_s, cfg.data.interpolate,
                         split=cfg.data.split)
    return ds, data.split(ds, cfg.data.split)


def _selection(ws: Path, train, cfg):
    f = ws / FEATURES
    if f.exists():
        d = _read_json(f)
        if d["threshold"] == cfg.features.threshold and d["feature_names"] == train.feature_names:
            return d["selected"], np.array(d["lengthscales"])
    selected, ls = pipeline.select_stage(train, cfg)
    _save_selection(ws, train, cfg, selected, ls)
    return selected, ls


def _save_selection(ws, train, cfg, selected, ls):
    _write_json(ws / FEATURES, {
        "threshold": cfg.features.threshold,
        "feature_names": list(train.feature_names),
        "standardization": np.asarray(train.standardization).tolist(),
        "lengthscales": np.asarray(ls).tolist(),
        "selected": [int(i) for i in selected],
        "relevance": gp_classification.relevance_report(ls, train.feature_names),
    })


def _detection(ws: Path, train, selected, cfg):
    f = ws / CHANGEPOINTS
    if f.exists():
        d = _read_json(f)
        if d["selected"] == list(selected) and d["gdcpd"] == cfg.to_dict()["gdcpd"]:
            return d
    results, grads, models = pipeline.detect_stage(train, selected, cfg)
    weights = pipeline.change_weights(results, grads, cfg.monitor.window)
    anchors = [None if a is None else int(a)
               for a in pipeline.anchors_from_changepoints(train, results, cfg)]
    d = {"selected": [int(i) for i in selected], "gdcpd": cfg.to_dict()["gdcpd"],
         "results": [r.to_dict() for r in results], "weights": weights.tolist(),
         "anchors": anchors, "gp_models": models}
    _write_json(f, d)
    return d


def _monitor(ws: Path, train, selected, det, cfg) -> wmd.MonitorConfig:
    f = ws / MONITOR
    if f.exists():
        d = _read_json(f)
        if d["selected"] == list(selected) and d["monitor"]["window_A"] == cfg.monitor.window:
            return wmd.MonitorConfig.from_dict(d["monitor"])
    mc = pipeline.monitor_stage(train, selected, np.array(det["weights"]), cfg)
    _write_json(f, {"selected": [int(i) for i in selected], "monitor": mc.to_dict()})
    return mc


# ---------------------------------------------------------------- commands

def cmd_simulate(args):
    out = Path(args.out)
    if args.kind == "plant":
        spec = synthetic.SyntheticSpec(n_cycles=args.cycles)
        raw, truth = synthetic.make_cycles(spec, seed=args.seed or 0)
        data.save_csv(raw, out / "plant.csv")
        _write_json(out / "plant_truth.json", truth.to_dict())
        print(f"wrote {out / 'plant.csv'} ({raw.n_rows} rows, {raw.n_features} features)")
        return 0
    suite = {sc.name: sc for sc in mjd.scenario_suite()}
    names = args.scenario or list(suite)
    unknown = [n for n in names if n not in suite]
    if unknown:
        raise ConfigError(f"unknown scenarios {unknown}; choose from {sorted(suite)}")
    truth = {}
    for name in names:
        sc = suite[name]
        for r in range(args.replications):
            seed = (args.seed or 0) + r
            t, S = sc.simulate(seed=seed)
            ds = data.TimeSeriesDataset(t, S[:, None], feature_names=["x1"])
            path = out / f"{name}_seed{seed}.csv"
            data.save_csv(ds, path)
            truth[path.name] = {"scenario": name, "seed": seed,
                                "changepoints": list(sc.ground_truth)}
    _write_json(out / "mjd_truth.json", truth)
    print(f"wrote {len(truth)} paths to {out}")
    return 0


def cmd_select_features(args):
    cfg = _config(args)
    ws = Path(args.out)
    _, (train, _, _) = _splits(args, cfg)
    selected, ls = pipeline.select_stage(train, cfg)
    _save_selection(ws, train, cfg, selected, ls)
    names = [train.feature_names[i] for i in selected]
    print(f"selected {len(selected)} of {train.n_features} features: {', '.join(names)}")
    return 0


def _detect_series(args, cfg):
    """Plain multichannel series (no break labels): GDCPD on the whole record."""
    raw = data.load_csv(_data_path(args, cfg))
    x = data._interpolate(raw.timestamps, raw.features)
    if args.log:
        if np.any(x <= 0):
            raise ValueError("--log needs strictly positive values")
        x = np.log(x)
    g = cfg.gdcpd
    res = changepoint.detect(raw.timestamps, x, K=g.k, A=g.window,
                             seed=stage_seed(cfg.seeds.root, "gdcpd"), restarts=g.restarts,
                             n_candidates=g.n_candidates, max_lengthscale=g.max_lengthscale,
                             min_lengthscale=g.min_lengthscale)
    ws = Path(args.out)
    _write_json(ws / CHANGEPOINTS, {"mode": "series", "results": [res.to_dict()]})
    _write_columns(ws / "score_curve.tsv", ["time", "score", "mean_diff"],
                   [raw.timestamps, res.score_curve, res.mean_diff_curve[:raw.n_rows]])
    print("change-points at t =", ", ".join(f"{v:g}" for v in res.timestamps))
    return 0


def cmd_detect(args):
    cfg = _config(args)
    raw_has_labels = data.load_csv(_data_path(args, cfg)).labels is not None
    if not raw_has_labels:
        return _detect_series(args, cfg)
    ws = Path(args.out)
    _, (train, _, _) = _splits(args, cfg)
    selected, _ = _selection(ws, train, cfg)
    det = _detection(ws, train, selected, cfg)
    cps = [r["changepoints"] for r in det["results"]]
    print(f"detected change-points in {len(cps)} pre-breakdown windows: {cps}")
    return 0


def cmd_calibrate_threshold(args):
    cfg = _config(args)
    ws = Path(args.out)
    _, (train, _, _) = _splits(args, cfg)
    selected, _ = _selection(ws, train, cfg)
    det = _detection(ws, train, selected, cfg)
    mc = _monitor(ws, train, selected, det, cfg)
    print(f"threshold b = {mc.threshold_b:.6g} (A = {mc.window_A})")
    return 0


def cmd_monitor(args):
    cfg = _config(args)
    ws = Path(args.out)
    feats = ws / FEATURES
    mon = ws / MONITOR
    if not (feats.exists() and mon.exists()):
        raise FileNotFoundError(f"{ws} has no {FEATURES}/{MONITOR}; run calibrate-threshold first")
    fd = _read_json(feats)
    mc = wmd.MonitorConfig.from_dict(_read_json(mon)["monitor"])
    raw = data.load_csv(_data_path(args, cfg))
    ds = data.apply_standardization(raw, fd["feature_names"], fd["standardization"],
                                    cfg.data.restart_exclusion_s, cfg.data.interpolate)
    sel = fd["selected"]
    alarms = []
    times, vals, runmax, cyc_id = [], [], [], []
    for ci, cyc in enumerate(pipeline.cycle_views(ds)):
        rep = pipeline.replay_cycle(ds, cyc, sel, mc)
        t = ds.timestamps[rep.rows]
        times.append(t)
        vals.append(rep.wmd)
        runmax.append(np.maximum.accumulate(rep.wmd))
        cyc_id.append(np.full(t.size, ci))
        if rep.alarm_pos is not None:
            alarms.append({"cycle": ci, "time": float(t[rep.alarm_pos]),
                           "wmd": float(rep.alarm_value),
                           "minutes_before_end": float((t[-1] - t[rep.alarm_pos]) / 60.0)})
    _write_columns(ws / "wmd.tsv", ["cycle", "time", "wmd", "running_max"],
                   [np.concatenate(cyc_id), np.concatenate(times), np.concatenate(vals),
                    np.concatenate(runmax)])
    _write_json(ws / "alarms.json", {"threshold_b": mc.threshold_b, "alarms": alarms})
    print(f"{len(alarms)} alarm(s) over {len(times)} cycle(s); b = {mc.threshold_b:.6g}")
    return 0


def cmd_train_rul(args):
    cfg = _config(args)
    ws = Path(args.out)
    _, (train, val, _) = _splits(args, cfg)
    selected, _ = _selection(ws, train, cfg)
    det = _detection(ws, train, selected, cfg)
    mc = _monitor(ws, train, selected, det, cfg)
    net, hist = pipeline.rul_stage(train, val, selected, mc, cfg, det["anchors"])
    _write_json(ws / NETWORK, {"network": net.to_dict(), "history": hist})
    best = min(hist["val"]) if hist["val"] else float("nan")
    print(f"trained RUL network; best validation loss {best:.5g}")
    return 0


def cmd_run_offline(args):
    cfg = _config(args)
    ws = Path(args.out)
    _, (train, val, _) = _splits(args, cfg)
    bundle = pipeline.run_offline(train, val, cfg)
    _save_selection(ws, train, cfg, bundle.selected, bundle.lengthscales)
    _write_json(ws / MONITOR, {"selected": bundle.selected, "monitor": bundle.monitor.to_dict()})
    _write_json(ws / NETWORK, {"network": bundle.network.to_dict(), "history": bundle.history})
    pipeline.save_bundle(bundle, ws / BUNDLE)
    print(f"bundle written to {ws / BUNDLE} (sha256 {bundle.digest()[:12]})")
    return 0


def _outcomes_to_json(outcomes):
    return [{"cycle": o.cycle, "failure_time": o.failure_time, "alarm_time": o.alarm_time,
             "lead_minutes": o.lead_minutes, "wmd_times": o.wmd_times.tolist(),
             "wmd": o.wmd.tolist(), "rul_times": o.rul_times.tolist(),
             "rul_pred": o.rul_pred.tolist(), "rul_true": o.rul_true.tolist()} for o in outcomes]


def _outcomes_from_json(items):
    return [pipeline.CycleOutcome(d["cycle"], d["failure_time"], d["alarm_time"],
                                  d["lead_minutes"], np.array(d["wmd_times"]), np.array(d["wmd"]),
                                  np.array(d["rul_times"]), np.array(d["rul_pred"]),
                                  np.array(d["rul_true"])) for d in items]


def cmd_run_online(args):
    cfg = _config(args)
    ws = Path(args.out)
    bundle = pipeline.load_bundle(Path(args.bundle) if args.bundle else ws / BUNDLE)
    bcfg = PipelineConfig.from_dict(bundle.config)
    raw = data.load_csv(_data_path(args, cfg))
    ds = data.apply_standardization(raw, bundle.feature_names, bundle.standardization,
                                    bcfg.data.restart_exclusion_s, bcfg.data.interpolate)
    if args.split == "test":
        ds = data.split(ds, bcfg.data.split)[2]
    outcomes = pipeline.run_online(ds, bundle, bcfg, calibrate=not args.no_calibrate)
    _write_json(ws / ONLINE / "outcomes.json", _outcomes_to_json(outcomes))
    agg = pipeline.evaluate(outcomes)["aggregate"]
    rmse = "n/a" if agg["rmse"] is None else f"{agg['rmse']:.4f}"
    print(f"{agg['alarms']}/{agg['cycles']} cycles alarmed; RMSE {rmse}")
    return 0


def _report_text(report) -> str:
    lines = ["cycle\talarm\tlead_min\tpoints\trmse\tsf"]
    fmt = (lambda v: "-" if v is None else f"{v:.4f}")
    for r in report["per_cycle"]:
        lines.append(f"{r['cycle']}\t{int(r['alarm'])}\t{fmt(r['lead_minutes'])}\t"
                     f"{r['n_points']}\t{fmt(r['rmse'])}\t{fmt(r['sf'])}")
    a = report["aggregate"]
    lines.append("")
    lines.append(f"cycles {a['cycles']}  alarms {a['alarms']}  misses {a['misses']}  "
                 f"points {a['points']}  RMSE {fmt(a['rmse'])}  SF {fmt(a['sf'])}")
    return "\n".join(lines) + "\n"


def cmd_evaluate(args):
    ws = Path(args.out)
    src = Path(args.outcomes) if args.outcomes else ws / ONLINE / "outcomes.json"
    if not src.exists():
        raise FileNotFoundError(f"{src} not found; run run-online first")
    outcomes = _outcomes_from_json(_read_json(src))
    report = pipeline.evaluate(outcomes)
    rep = ws / REPORT
    _write_json(rep / "report.json", report)
    (rep / "report.txt").write_text(_report_text(report))
    for o in outcomes:
        _write_columns(rep / f"cycle{o.cycle:03d}_wmd.tsv", ["time", "wmd"], [o.wmd_times, o.wmd])
        _write_columns(rep / f"cycle{o.cycle:03d}_rul.tsv", ["time", "rul_pred", "rul_true"],
                       [o.rul_times, o.rul_pred, o.rul_true])
    _write_columns(rep / "alarms.tsv", ["cycle", "alarm_time", "failure_time", "lead_minutes"],
                   [[o.cycle for o in outcomes],
                    [np.nan if o.alarm_time is None else o.alarm_time for o in outcomes],
                    [o.failure_time for o in outcomes],
                    [np.nan if o.lead_minutes is None else o.lead_minutes for o in outcomes]])
    sys.stdout.write(_report_text(report))
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="YAML/JSON config with sections data, features, "
                                         "gdcpd, monitor, rul, seeds")
    shared.add_argument("--seed", type=int, help="root seed (overrides seeds.root)")
    shared.add_argument("--window", type=int, help="window A in samples for GDCPD and the monitor")
    shared.add_argument("--k", type=int, help="change-points per window")
    shared.add_argument("--threshold", type=float, help="ARD length-scale relevance threshold")
    shared.add_argument("--out", default="earlywarn-out", help="workspace directory")
    shared.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="earlywarn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, needs_data=True):
        sp = sub.add_parser(name, parents=[shared], help=help_)
        if needs_data:
            sp.add_argument("data", nargs="?", help="input CSV (time,y,x1..xD)")
        sp.set_defaults(func=fn)
        return sp

    sp = add("simulate", cmd_simulate, "write MJD scenario paths or the plant fixture as CSV",
             needs_data=False)
    sp.add_argument("--kind", choices=("mjd", "plant"), default="mjd")
    sp.add_argument("--scenario", action="append", help="scenario name (repeatable; default all)")
    sp.add_argument("--replications", type=int, default=1)
    sp.add_argument("--cycles", type=int, default=20, help="plant fixture cycles")
    add("select-features", cmd_select_features, "ARD relevance ranking and feature selection")
    sp = add("detect", cmd_detect, "GDCPD change-points (per pre-breakdown window, or whole series)")
    sp.add_argument("--log", action="store_true", help="detect on log values (unlabelled series)")
    add("calibrate-threshold", cmd_calibrate_threshold, "WMD weights, covariance and threshold b")
    add("monitor", cmd_monitor, "replay a stream through the WMD monitor")
    add("train-rul", cmd_train_rul, "train the RUL network on alarm-anchored sequences")
    add("run-offline", cmd_run_offline, "full offline build into a model bundle")
    sp = add("run-online", cmd_run_online, "replay with alarms and calibrated RUL prediction")
    sp.add_argument("--bundle", help="bundle directory (default <out>/bundle)")
    sp.add_argument("--split", choices=("test", "all"), default="test",
                    help="replay only the test cycles of the file, or all of it")
    sp.add_argument("--no-calibrate", action="store_true")
    sp = add("evaluate", cmd_evaluate, "RMSE/SF report and plottable column files",
             needs_data=False)
    sp.add_argument("--outcomes", help="outcomes.json (default <out>/online/outcomes.json)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, data.IngestionError, pipeline.StageError, pipeline.CompatibilityError,
            FileNotFoundError, ValueError) as exc:
        print(f"earlywarn {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
