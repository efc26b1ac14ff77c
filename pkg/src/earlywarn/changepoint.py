"""Gaussian derivative change-point detection (GDCPD).

Candidates come from the summed absolute GP derivative means; each
candidate is refined to the nearby maximum of the windowed mean difference
and its neighbourhood suppressed before the next round.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gp_regression
from .kernels import KernelHyperparams


@dataclass
class ChangePointResult:
    changepoints: list            # indices, ascending
    timestamps: list
    score_curve: np.ndarray       # S_i
    mean_diff_curve: np.ndarray   # |D(k, A)| for k in [A, N - A], NaN elsewhere
    attributions: list            # per change-point |grad mu| per feature
    window: int
    truncated: bool = False
    features: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "changepoints": [int(c) for c in self.changepoints],
            "timestamps": [float(t) for t in self.timestamps],
            "window": self.window,
            "truncated": self.truncated,
            "features": [int(f) for f in self.features],
            "attributions": [np.asarray(a).tolist() for a in self.attributions],
            "score_curve": np.asarray(self.score_curve).tolist(),
            "mean_diff_curve": [None if not np.isfinite(v) else float(v)
                                for v in self.mean_diff_curve],
        }


def derivative_score(grad_means) -> np.ndarray:
    """S_i = sum_d |grad mu_{i,d}|."""
    g = np.asarray(grad_means, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    return np.sum(np.abs(g), axis=1)


def candidate_changepoints(S, K: int, exclusion=()) -> list:
    """K indices by repeated argmax of S (lowest index wins ties), ascending."""
    S = np.asarray(S, dtype=float)
    if K < 1:
        raise ValueError("K must be >= 1")
    masked = S.copy()
    excl = np.fromiter(exclusion, dtype=int) if len(exclusion) else np.empty(0, int)
    available = S.size - np.unique(excl).size
    if K > available:
        raise ValueError(f"K={K} exceeds {available} available indices")
    masked[excl] = -np.inf
    chosen = []
    for _ in range(K):
        i = int(np.argmax(masked))
        chosen.append(i)
        masked[i] = -np.inf
    return sorted(chosen)


def candidate_peaks(S, n: int, A: int) -> list:
    """Up to ``n`` S-maximizing indices in [A, N - A], each > A from the others."""
    S = np.asarray(S, dtype=float)
    N = S.size
    work = np.full(N, -np.inf)
    work[A:N - A + 1] = S[A:N - A + 1]
    peaks = []
    while len(peaks) < n and np.any(work > -np.inf):
        i = int(np.argmax(work))
        peaks.append(i)
        work[max(0, i - A):i + A + 1] = -np.inf
    return peaks


def window_mean_difference(x, k: int, A: int) -> float:
    """Euclidean norm of mean(x[k:k+A]) - mean(x[k-A:k]).

    In 1-based terms the right window is [k+1, k+A] and the left one is
    [k-A+1, k].  Valid for A <= k <= N - A.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    N = x.shape[0]
    if not A <= k <= N - A:
        raise IndexError(f"k={k} outside [{A}, {N - A}]")
    d = x[k:k + A].mean(axis=0) - x[k - A:k].mean(axis=0)
    return float(np.sqrt(np.sum(d * d)))


def mean_difference_curve(x, A: int) -> np.ndarray:
    """|D(k, A)| for every k; NaN outside [A, N - A]."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    N = x.shape[0]
    out = np.full(N + 1, np.nan)
    if N < 2 * A:
        return out
    c = np.vstack([np.zeros((1, x.shape[1])), np.cumsum(x, axis=0)])
    k = np.arange(A, N - A + 1)
    d = (c[k + A] - c[k]) / A - (c[k] - c[k - A]) / A
    out[k] = np.sqrt(np.sum(d * d, axis=1))
    return out


def detect_from_gradients(x, grad_means, K: int, A: int, timestamps=None,
                          n_candidates: int | None = None) -> ChangePointResult:
    """Run the detection loop given signals ``x`` (N x D) and derivative means.

    Each round takes the S-argmax over unsuppressed indices, refines it to
    the max of |D(k, A)| on [cand - A, cand + A] within [A, N - A], then
    zeroes both curves on [tau - A, tau + A] so detections stay > A apart.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    g = np.asarray(grad_means, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    N = x.shape[0]
    if K < 1:
        raise ValueError("K must be >= 1")
    if N <= 2 * A:
        raise ValueError(f"need N > 2A, got N={N}, A={A}")
    ts = np.arange(N, dtype=float) if timestamps is None else np.asarray(timestamps, float)

    S = derivative_score(g)
    Dfull = mean_difference_curve(x, A)
    d_work = np.nan_to_num(Dfull[:N], nan=-np.inf)
    pool = candidate_peaks(S, n_candidates or K, A)
    found, attributions = [], []
    while len(found) < K:
        best, best_val = None, -np.inf
        for cand in pool:
            lo, hi = max(A, cand - A), min(N - A, cand + A)
            if lo > hi:
                continue
            j = lo + int(np.argmax(d_work[lo:hi + 1]))
            if d_work[j] > best_val:
                best, best_val = j, d_work[j]
        if best is None:
            break
        tau = best
        found.append(tau)
        attributions.append(np.abs(g[tau]))
        d_work[max(0, tau - A):min(N, tau + A + 1)] = -np.inf
        pool = [c for c in pool if abs(c - tau) > A]
    order = np.argsort(found)
    found = [found[i] for i in order]
    attributions = [attributions[i] for i in order]
    return ChangePointResult(
        changepoints=found,
        timestamps=[float(ts[i]) for i in found],
        score_curve=S,
        mean_diff_curve=Dfull[:N],
        attributions=attributions,
        window=A,
        truncated=len(found) < K,
    )


def fit_gradients(t, x, seed=0, restarts: int = 3, max_fit_points: int | None = None,
                  init: KernelHyperparams | None = None, max_lengthscale: float | None = None,
                  min_lengthscale: float | None = None):
    """Fit one GP per column of ``x`` and return (derivative means, models)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    # same seed per column keeps results invariant to feature order
    models, grads = [], []
    for d in range(x.shape[1]):
        m = gp_regression.fit(t, x[:, d], init=init, restarts=restarts,
                              seed=seed, max_fit_points=max_fit_points,
                              max_lengthscale=max_lengthscale,
                              min_lengthscale=min_lengthscale)
        models.append(m)
        grads.append(gp_regression.derivative_posterior(m, t).mean)
    return np.column_stack(grads), models


def detect(t, x, K: int, A: int, features=None, seed=0, restarts: int = 3,
           max_fit_points: int | None = None, n_candidates: int | None = None,
           max_lengthscale: float | None = None,
           min_lengthscale: float | None = None) -> ChangePointResult:
    """GDCPD on the selected feature columns of ``x`` sampled at times ``t``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    features = list(range(x.shape[1])) if features is None else list(features)
    xs = x[:, features]
    grads, _ = fit_gradients(t, xs, seed=seed, restarts=restarts, max_fit_points=max_fit_points,
                             max_lengthscale=max_lengthscale, min_lengthscale=min_lengthscale)
    res = detect_from_gradients(xs, grads, K, A, timestamps=t, n_candidates=n_candidates)
    res.features = features
    return res
