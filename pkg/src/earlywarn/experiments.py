"""Simulation studies: change-point recovery on the MJD scenarios and the JNR sweep.

Detection runs on log S, where the jump-diffusion increments are additive,
with settings tuned for paths of ~1000 samples: short GDCPD windows, a
candidate pool of 3K peaks and length-scales capped at one step so a jump
stays a local feature of the posterior mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from . import changepoint, mjd


@dataclass
class DetectionSettings:
    window_A: int = 2
    restarts: int = 1
    max_fit_points: int | None = 400
    candidates_per_change: int = 3
    max_lengthscale_steps: float = 1.0
    tolerance_windows: float = 2.0     # success if |tau_hat - tau| <= this * A * dt


@dataclass
class RecoveryResult:
    scenario: str
    replications: int
    successes: int
    errors: list = field(default_factory=list)     # worst |tau_hat - tau| per replication

    @property
    def rate(self) -> float:
        return self.successes / self.replications


def detect_scenario_path(scenario: mjd.MJDScenario, seed: int,
                         settings: DetectionSettings | None = None):
    """Simulate one path and return (detected times, worst error vs ground truth)."""
    s = settings or DetectionSettings()
    t, S = scenario.simulate(seed=seed)
    K = len(scenario.ground_truth)
    if np.any(S <= 0):
        raise mjd.SimulationError(f"{scenario.name}: non-positive path, log undefined")
    res = changepoint.detect(t, np.log(S), K=K, A=s.window_A, seed=seed, restarts=s.restarts,
                             max_fit_points=s.max_fit_points,
                             n_candidates=s.candidates_per_change * K,
                             max_lengthscale=s.max_lengthscale_steps * scenario.params.dt)
    found = np.asarray(res.timestamps, dtype=float)
    if found.size == 0:
        return found, np.inf
    err = max(float(np.min(np.abs(found - g))) for g in scenario.ground_truth)
    return found, err


def scenario_recovery(scenarios=None, replications: int = 20,
                      settings: DetectionSettings | None = None) -> list:
    """Share of replications whose detections all land within tolerance of the truth."""
    s = settings or DetectionSettings()
    out = []
    for sc in scenarios or mjd.scenario_suite():
        tol = s.tolerance_windows * s.window_A * sc.params.dt
        errs = [detect_scenario_path(sc, r, s)[1] for r in range(replications)]
        out.append(RecoveryResult(sc.name, replications, int(sum(e <= tol for e in errs)), errs))
    return out


@dataclass
class JNRResult:
    alphas: list
    jnr: list
    median_errors: list
    errors: list

    @property
    def rank_correlation(self) -> float:
        return float(spearmanr(self.jnr, self.median_errors).statistic)

    @property
    def inversions(self) -> int:
        """Adjacent increases of the median error as JNR grows."""
        m = self.median_errors
        return int(sum(b > a for a, b in zip(m, m[1:])))


def jnr_sweep(alphas=(0.02, 0.05, 0.1, 0.2), replications: int = 20, base: str = "MJD_t_no",
              delta: float = 0.01, settings: DetectionSettings | None = None) -> JNRResult:
    """Median change-point error over replications for each jump size."""
    s = settings or DetectionSettings()
    sc0 = next(sc for sc in mjd.scenario_suite() if sc.name == base)
    jnrs, meds, all_errs = [], [], []
    for a in alphas:
        sc = mjd.with_alpha(sc0, a, delta)
        errs = [detect_scenario_path(sc, r, s)[1] for r in range(replications)]
        jnrs.append(mjd.jnr(sc.params.lam, a, sc.params.sigma))
        meds.append(float(np.median(errs)))
        all_errs.append(errs)
    return JNRResult(list(alphas), jnrs, meds, all_errs)
