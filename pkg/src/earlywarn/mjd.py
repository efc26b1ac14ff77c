"""Seeded Merton jump-diffusion scenarios with known change-points.

Linear paths follow the exact log solution
``S_t = S_0 exp(mu t + sigma W_t - sigma^2 t / 2 + J_t)`` step by step, with
the drift switching between ``mu_pre`` and ``mu_post`` at each change-point.
Nonlinear paths ``dS = f dt + g dW + h dJ`` use Euler-Maruyama.

Random draws come from a Philox generator in a fixed order (diffusion
normals, Poisson counts, jump sizes), so a path prefix depends only on the
seed and on parameters that act before that point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np


class SimulationError(RuntimeError):
    pass


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class MJDParams:
    mu_pre: float = 0.0
    mu_post: float = 0.0
    sigma: float = 0.1
    lam: float = 0.18
    alpha: float = 0.1
    delta: float = 0.1
    s0: float = 1.0
    horizon_T: float = 10.0
    dt: float = 1e-2
    changepoints: tuple = ()
    # Jumps placed exactly at the change-points with mean size alpha,
    # instead of Poisson arrivals.
    planted_jumps: bool = False

    def __post_init__(self):
        object.__setattr__(self, "changepoints", tuple(float(c) for c in self.changepoints))
        if self.sigma < 0 or self.lam < 0 or self.delta < 0:
            raise ValueError("sigma, lam and delta must be non-negative")
        if self.s0 <= 0 or self.horizon_T <= 0 or self.dt <= 0:
            raise ValueError("s0, horizon_T and dt must be positive")
        steps = self.horizon_T / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("dt must divide horizon_T")
        cps = np.asarray(self.changepoints)
        if cps.size and (np.any(np.diff(cps) <= 0) or cps[0] <= 0 or cps[-1] >= self.horizon_T):
            raise ValueError("changepoints must be strictly increasing and interior")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon_T / self.dt))

    def time_grid(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


def regime_index(t: np.ndarray, changepoints) -> np.ndarray:
    """Number of change-points at or before each time."""
    return np.searchsorted(np.asarray(changepoints, dtype=float), t, side="right")


def _step_jump_counts(params: MJDParams, t_left, rng, n):
    counts = rng.poisson(params.lam * params.dt, size=n)
    if params.planted_jumps:
        counts = np.zeros(n, dtype=np.int64)
        # a jump at tau belongs to the step (t_k, t_k + dt] that contains it
        idx = np.ceil(np.asarray(params.changepoints) / params.dt - 1e-9).astype(int) - 1
        np.add.at(counts, np.clip(idx, 0, n - 1), 1)
    return counts


def simulate_linear(params: MJDParams, seed=0):
    """Return ``(t, S)`` with ``n_steps + 1`` samples."""
    n = params.n_steps
    t = params.time_grid()
    rng = _rng(seed)
    xi = rng.standard_normal(n)
    counts = _step_jump_counts(params, t[:-1], rng, n)
    marks = rng.normal(params.alpha, params.delta, size=int(counts.sum()))
    if params.planted_jumps:
        marks = np.full(marks.shape, params.alpha)
    jumps = np.zeros(n)
    np.add.at(jumps, np.repeat(np.arange(n), counts), marks)

    # drift alternates pre/post at each change-point
    mu = np.where(regime_index(t[:-1], params.changepoints) % 2 == 0,
                  params.mu_pre, params.mu_post)
    dlog = (mu - 0.5 * params.sigma**2) * params.dt + params.sigma * math.sqrt(params.dt) * xi + jumps
    logS = np.concatenate([[math.log(params.s0)], math.log(params.s0) + np.cumsum(dlog)])
    return t, np.exp(logS)


@dataclass(frozen=True)
class NonlinearSpec:
    """Drift f(S, t), diffusion g(S, t) and jump scale h(S, t)."""

    drift_f: Callable
    vol_g: Callable
    jump_h: Callable
    name: str = "custom"


def euler_maruyama(spec: NonlinearSpec, s0: float, t: np.ndarray, dW: np.ndarray,
                   dJ: np.ndarray, guard: tuple = (-1e6, 1e6)) -> np.ndarray:
    """Integrate ``S_{k+1} = S_k + f dt + g dW_k + h dJ_k`` on grid ``t``."""
    n = t.size - 1
    S = np.empty(n + 1)
    S[0] = s0
    for k in range(n):
        s, tk = S[k], t[k]
        g = spec.vol_g(s, tk)
        if g < 0:
            raise SimulationError(f"negative volatility {g} at step {k}")
        S[k + 1] = s + spec.drift_f(s, tk) * (t[k + 1] - tk) + g * dW[k] + spec.jump_h(s, tk) * dJ[k]
        if not (guard[0] <= S[k + 1] <= guard[1]) or not math.isfinite(S[k + 1]):
            raise SimulationError(f"path left guard range {guard} at step {k + 1}")
    return S


def simulate_nonlinear(spec: NonlinearSpec, params: MJDParams, seed=0,
                       guard: tuple = (-1e6, 1e6)):
    """Euler-Maruyama path of a nonlinear jump-diffusion.

    The jump increment per step is the compound sum of Poisson(lam dt)
    marks drawn from Normal(alpha, delta^2); with ``alpha=1, delta=0`` it is
    the plain jump count and ``h`` is the jump size.
    """
    n = params.n_steps
    t = params.time_grid()
    rng = _rng(seed)
    dW = math.sqrt(params.dt) * rng.standard_normal(n)
    counts = _step_jump_counts(params, t[:-1], rng, n)
    marks = rng.normal(params.alpha, params.delta, size=int(counts.sum()))
    if params.planted_jumps:
        marks = np.full(marks.shape, params.alpha)
    dJ = np.zeros(n)
    np.add.at(dJ, np.repeat(np.arange(n), counts), marks)
    return t, euler_maruyama(spec, params.s0, t, dW, dJ, guard)


def jnr(lam: float, alpha: float, sigma: float) -> float:
    """Jump-noise ratio lam * alpha / sigma."""
    if sigma == 0:
        raise ZeroDivisionError("JNR undefined for sigma = 0")
    return lam * alpha / sigma


def _sqrt_pos(s):
    return math.sqrt(max(s, 0.0))


POLY_NO = NonlinearSpec(
    drift_f=lambda s, t: 0.01 * s * (1.0 - s),
    vol_g=lambda s, t: 0.1 * _sqrt_pos(s),
    jump_h=lambda s, t: 0.10,
    name="poly_no",
)

POLY_UP = NonlinearSpec(
    drift_f=lambda s, t: 0.1 * s * (1.0 - s) + 0.041 * t,
    vol_g=lambda s, t: 0.14 * _sqrt_pos(s),
    jump_h=lambda s, t: 0.10,
    name="poly_up",
)


@dataclass(frozen=True)
class MJDScenario:
    name: str
    params: MJDParams
    nonlinear: NonlinearSpec | None = None
    ground_truth: tuple = field(default=())

    def simulate(self, seed=0):
        if self.nonlinear is None:
            return simulate_linear(self.params, seed)
        return simulate_nonlinear(self.nonlinear, self.params, seed)


TAU_LINEAR = 5.7057
TAU_POLY = 5.0
MCP_TAUS = (0.2861, 1.0263, 1.5904, 2.6647)


def scenario_suite() -> list[MJDScenario]:
    """The seven benchmark scenarios with their ground-truth change-points.

    Every scenario realizes its change-points as jumps placed at the
    ground-truth times (mean mark ``alpha``); MJD_t_inv and MCP also switch
    drift there.
    """
    base = dict(s0=1.0, horizon_T=10.0, dt=1e-2, planted_jumps=True)
    lin = [
        ("MJD_t_no", 0.00, 0.00, 0.10, 0.18, 0.10, 0.10),
        ("MJD_t_up", 0.10, 0.10, 0.10, 0.18, 0.10, 0.10),
        ("MJD_t_inv", 0.10, -0.05, 0.10, 0.18, 0.10, 0.10),
        ("MJD_t_down", 0.06, 0.06, 0.10, 0.18, -0.10, 0.01),
    ]
    out = [
        MJDScenario(name, MJDParams(mp, mq, sg, lm, al, de, changepoints=(TAU_LINEAR,), **base),
                    ground_truth=(TAU_LINEAR,))
        for name, mp, mq, sg, lm, al, de in lin
    ]
    # nonlinear: jump count increments (alpha=1, delta=0) scaled by h
    for name, spec in (("MJD_p_no", POLY_NO), ("MJD_p_up", POLY_UP)):
        p = MJDParams(0.0, 0.0, 0.0, 0.18, 1.0, 0.0, changepoints=(TAU_POLY,), **base)
        out.append(MJDScenario(name, p, spec, ground_truth=(TAU_POLY,)))
    mcp = MJDParams(0.30, -0.40, 0.30, 0.90, -0.10, 0.20, s0=1.0, horizon_T=4.0, dt=1e-3,
                    changepoints=MCP_TAUS, planted_jumps=True)
    out.append(MJDScenario("MCP", mcp, ground_truth=MCP_TAUS))
    return out


def with_alpha(scenario: MJDScenario, alpha: float, delta: float | None = None) -> MJDScenario:
    """Copy of a linear scenario with a different mean jump size."""
    p = replace(scenario.params, alpha=alpha,
                delta=scenario.params.delta if delta is None else delta)
    return replace(scenario, params=p)
