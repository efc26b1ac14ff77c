"""Mahalanobis / weighted-Mahalanobis distances and sliding-window monitoring."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


class DegenerateInputError(ValueError):
    pass


def _check_spd(cov_inv: np.ndarray):
    if cov_inv.ndim != 2 or cov_inv.shape[0] != cov_inv.shape[1]:
        raise ValueError(f"cov_inv must be square, got {cov_inv.shape}")
    if not np.allclose(cov_inv, cov_inv.T, atol=1e-9, rtol=0):
        raise np.linalg.LinAlgError("cov_inv is not symmetric")
    try:
        np.linalg.cholesky(cov_inv)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("cov_inv is not positive definite") from None


def _quad(diff: np.ndarray, cov_inv: np.ndarray) -> float:
    q = float(diff @ cov_inv @ diff)
    return np.sqrt(max(q, 0.0))


def mahalanobis(omega, zeta, cov_inv) -> float:
    """sqrt((omega - zeta)^T Sigma^-1 (omega - zeta))."""
    cov_inv = np.asarray(cov_inv, dtype=float)
    _check_spd(cov_inv)
    diff = np.asarray(omega, dtype=float) - np.asarray(zeta, dtype=float)
    if diff.shape != (cov_inv.shape[0],):
        raise ValueError("dimension mismatch between vectors and cov_inv")
    return _quad(diff, cov_inv)


def weighted_mahalanobis(omega, zeta, W, cov_inv) -> float:
    """sqrt((omega - zeta)^T W^T Sigma^-1 W (omega - zeta)).

    ``W`` may be given as a diagonal matrix or as its diagonal.
    """
    cov_inv = np.asarray(cov_inv, dtype=float)
    _check_spd(cov_inv)
    W = np.asarray(W, dtype=float)
    w = np.diag(W) if W.ndim == 2 else W
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    diff = np.asarray(omega, dtype=float) - np.asarray(zeta, dtype=float)
    if diff.shape != w.shape or diff.shape != (cov_inv.shape[0],):
        raise ValueError("dimension mismatch between vectors, W and cov_inv")
    return _quad(w * diff, cov_inv)


def derivative_weights(grad_magnitudes) -> np.ndarray:
    """Normalize non-negative derivative magnitudes to weights summing to 1."""
    g = np.abs(np.atleast_1d(np.asarray(grad_magnitudes, dtype=float)))
    total = g.sum()
    if not total > 0:
        raise DegenerateInputError("all derivative magnitudes are zero")
    return g / total


def estimate_cov_inv(training_segments, ridge: float = 1e-3) -> np.ndarray:
    """Inverse of (sample covariance + ridge * I) from rows of observations."""
    X = np.asarray(training_segments, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape
    if n < d + 1:
        raise ValueError(f"need at least {d + 1} rows, got {n}")
    cov = np.atleast_2d(np.cov(X, rowvar=False)) + ridge * np.eye(d)
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("covariance is singular; use ridge > 0") from None
    if np.linalg.cond(cov) > 1e12:
        raise np.linalg.LinAlgError("covariance is singular; use ridge > 0")
    inv = np.linalg.inv(cov)
    return 0.5 * (inv + inv.T)


@dataclass
class MonitorConfig:
    window_A: int
    weights_W: np.ndarray
    cov_inv: np.ndarray
    threshold_b: float = np.inf

    def __post_init__(self):
        self.weights_W = np.asarray(self.weights_W, dtype=float)
        self.cov_inv = np.asarray(self.cov_inv, dtype=float)
        if self.window_A < 1:
            raise ValueError("window_A must be >= 1")
        if np.any(self.weights_W < 0) or abs(self.weights_W.sum() - 1.0) > 1e-9:
            raise ValueError("weights_W must be non-negative and sum to 1")
        _check_spd(self.cov_inv)
        if self.cov_inv.shape[0] != self.weights_W.size:
            raise ValueError("weights_W and cov_inv dimensions differ")

    @property
    def M(self) -> np.ndarray:
        """W^T Sigma^-1 W for a diagonal W."""
        w = self.weights_W
        return w[:, None] * self.cov_inv * w[None, :]

    def to_dict(self) -> dict:
        return {
            "window_A": int(self.window_A),
            "weights_W": self.weights_W.tolist(),
            "cov_inv": self.cov_inv.tolist(),
            "threshold_b": float(self.threshold_b),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MonitorConfig":
        return cls(d["window_A"], d["weights_W"], d["cov_inv"], d["threshold_b"])


@dataclass(frozen=True)
class AlarmEvent:
    time_index: int
    wmd_value: float
    stopping_time: bool = True


def _wmd_rows(diffs: np.ndarray, config: MonitorConfig) -> np.ndarray:
    wd = diffs * config.weights_W
    q = np.einsum("ij,jk,ik->i", wd, config.cov_inv, wd)
    return np.sqrt(np.maximum(q, 0.0))


def segment_wmd(x, config: MonitorConfig) -> np.ndarray:
    """Offline WMD(k, A) over a segment; entry j is for k = A + j.

    omega is the mean of the A samples starting at k and zeta the mean of
    the A samples before k.
    """
    x = np.asarray(x, dtype=float)
    A = config.window_A
    N = x.shape[0]
    if N < 2 * A:
        return np.empty(0)
    out = np.empty(N - 2 * A + 1)
    for j, k in enumerate(range(A, N - A + 1)):
        omega = x[k:k + A].mean(axis=0)
        zeta = x[k - A:k].mean(axis=0)
        out[j] = _wmd_rows((omega - zeta)[None, :], config)[0]
    return out


class OnlineMonitor:
    """Single-stream sliding-window WMD monitor.

    Keeps the last 2A samples; once full it emits the WMD between the
    newest A samples and the A before them, and tracks the running maximum
    against the threshold.
    """

    def __init__(self, config: MonitorConfig):
        self.config = config
        self._buf = deque(maxlen=2 * config.window_A)
        self.t = -1
        self.running_max = -np.inf
        self.alarm: AlarmEvent | None = None

    def reset(self):
        """Drop history, e.g. after a restart; warm-up starts over."""
        self._buf.clear()
        self.running_max = -np.inf
        self.alarm = None

    def update(self, sample) -> float | None:
        self.t += 1
        self._buf.append(np.asarray(sample, dtype=float))
        A = self.config.window_A
        if len(self._buf) < 2 * A:
            return None
        arr = np.asarray(self._buf)
        value = float(_wmd_rows((arr[A:].mean(axis=0) - arr[:A].mean(axis=0))[None, :],
                                self.config)[0])
        self.running_max = max(self.running_max, value)
        if self.alarm is None and self.running_max >= self.config.threshold_b:
            self.alarm = AlarmEvent(self.t, value, True)
        return value


def online_wmd_series(stream, config: MonitorConfig) -> np.ndarray:
    """WMD for every step once 2A samples have arrived (warm-up emits nothing)."""
    mon = OnlineMonitor(config)
    out = [v for v in (mon.update(s) for s in stream) if v is not None]
    return np.asarray(out)


def stopping_time(series, threshold_b: float) -> AlarmEvent | None:
    """First index where the running max of ``series`` reaches ``threshold_b``."""
    for i, v in enumerate(np.asarray(series, dtype=float)):
        if v >= threshold_b:
            return AlarmEvent(i, float(v), True)
    return None


def offline_threshold(segments, config: MonitorConfig) -> float:
    """Mean over segments of each segment's maximum WMD."""
    segments = list(segments)
    if not segments:
        raise ValueError("no segments given")
    maxima = []
    for seg in segments:
        w = segment_wmd(seg, config)
        if w.size == 0:
            raise ValueError(f"segment of length {len(seg)} shorter than 2A")
        maxima.append(w.max())
    return float(np.mean(maxima))
