"""Synthetic run-to-failure sensor data with planted degradation precursors.

Each cycle runs at its own operating point, which moves every channel by a
channel-specific loading, so a channel's level on its own says little about
health.  Each cycle starts with a short unstable restart period and runs
healthy for a few hours.  Then each planted channel, at its own lead time before the
breakdown, steps away from its healthy mean and keeps drifting until the
breakdown.  The drift rate is set so every channel reaches the same level at
failure, which is what makes the remaining life learnable.  Independent
onsets keep the planted channels from being redundant copies of each other.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import TimeSeriesDataset


@dataclass
class SyntheticSpec:
    n_cycles: int = 20
    n_features: int = 12
    planted: tuple = (1, 4, 8)
    cadence_s: float = 120.0
    restart_rows: int = 15           # unstable rows after each restart
    healthy_rows: tuple = (120, 180)
    lead_minutes: tuple = (20.0, 100.0)
    step_size: float = 8.0           # in units of the channel's noise std
    failure_level: float = 11.5
    ar_coef: float = 0.3
    common_loading: float = 0.0      # share of a common factor in the noise
    operating_spread: float = 100.0  # std of the per-cycle operating point


@dataclass
class SyntheticTruth:
    failure_times: list = field(default_factory=list)
    onset_times: list = field(default_factory=list)
    planted: tuple = ()

    def to_dict(self) -> dict:
        return {"failure_times": list(map(float, self.failure_times)),
                "onset_times": list(map(float, self.onset_times)),
                "planted": [int(i) for i in self.planted]}


def _ar1(rng, n, d, phi):
    e = rng.standard_normal((n, d)) * np.sqrt(1 - phi**2)
    out = np.empty_like(e)
    out[0] = rng.standard_normal(d)
    for i in range(1, n):
        out[i] = phi * out[i - 1] + e[i]
    return out


def make_cycles(spec: SyntheticSpec | None = None, seed=0):
    """Return ``(raw dataset, truth)``; features are in raw sensor units."""
    spec = spec or SyntheticSpec()
    rng = np.random.default_rng(seed)
    D = spec.n_features
    if any(not 0 <= p < D for p in spec.planted):
        raise ValueError("planted feature index out of range")
    level = rng.uniform(-5, 5, D)
    scale = rng.uniform(0.5, 3.0, D)
    sign = np.where(rng.random(D) < 0.5, -1.0, 1.0)
    load = np.zeros(D)
    load[rng.permutation(D)[: D // 2]] = spec.common_loading
    op_load = rng.uniform(0.5, 1.5, D)

    rows_t, rows_x, rows_y = [], [], []
    truth = SyntheticTruth(planted=tuple(spec.planted))
    t = 0.0
    dt = spec.cadence_s
    for c in range(spec.n_cycles):
        n_h = int(rng.integers(spec.healthy_rows[0], spec.healthy_rows[1] + 1))
        leads = np.round(rng.uniform(*spec.lead_minutes, size=len(spec.planted)) * 60.0 / dt)
        leads = leads.astype(int)
        n = spec.restart_rows + n_h + int(leads.max(initial=1))
        common = _ar1(rng, n, 1, spec.ar_coef)
        noise = np.sqrt(1 - load**2) * _ar1(rng, n, D, spec.ar_coef) + load * common
        # restart transient: large decaying excursions (the record opens mid-run,
        # so the first cycle has none)
        r = spec.restart_rows if c > 0 else 0
        noise[:r] += rng.normal(0, 4.0, (r, D)) * np.linspace(1, 0.2, r)[:, None]
        dev = np.zeros((n, D))
        for p, lead in zip(spec.planted, leads):
            u = np.arange(lead, dtype=float)
            rate = (spec.failure_level - spec.step_size) / max(lead - 1, 1)
            dev[n - lead:, p] = sign[p] * (spec.step_size + rate * u)
        onset = n - int(leads.max(initial=1))
        op = spec.operating_spread * rng.standard_normal()
        X = level + scale * (noise + dev + op * op_load)
        times = t + dt * np.arange(1, n + 1)
        y = np.zeros(n, dtype=int)
        y[-1] = 1
        truth.onset_times.append(times[onset])
        truth.failure_times.append(times[-1])
        rows_t.append(times)
        rows_x.append(X)
        rows_y.append(y)
        t = times[-1]
    ds = TimeSeriesDataset(np.concatenate(rows_t), np.vstack(rows_x), np.concatenate(rows_y))
    return ds, truth
