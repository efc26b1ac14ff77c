"""RBF / ARD covariance functions, their derivatives and Gram assembly."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class KernelHyperparams:
    """Hyperparameters shared by the isotropic RBF and ARD kernels.

    ``length_scales`` has one entry for the isotropic kernel over time and
    D entries for ARD over features.
    """

    signal_variance: float = 1.0
    length_scales: np.ndarray = field(default_factory=lambda: np.ones(1))
    noise_variance: float = 0.0

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        object.__setattr__(self, "length_scales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        if not np.isfinite(self.signal_variance) or self.signal_variance <= 0:
            raise ValueError(f"signal_variance must be > 0, got {self.signal_variance}")
        if ls.size == 0 or not np.all(np.isfinite(ls)) or np.any(ls <= 0):
            raise ValueError(f"length_scales must be positive, got {ls}")
        if not np.isfinite(self.noise_variance) or self.noise_variance < 0:
            raise ValueError(f"noise_variance must be >= 0, got {self.noise_variance}")

    @property
    def lengthscale(self) -> float:
        """The single length-scale of an isotropic kernel."""
        return float(self.length_scales[0])

    def to_log(self) -> np.ndarray:
        """Pack as ``[log sigma^2, log l_1..l_D, log sigma_n^2]``."""
        return np.concatenate(
            [[np.log(self.signal_variance)], np.log(self.length_scales),
             [np.log(self.noise_variance)]]
        )

    @classmethod
    def from_log(cls, theta) -> "KernelHyperparams":
        theta = np.asarray(theta, dtype=float)
        return cls(np.exp(theta[0]), np.exp(theta[1:-1]), np.exp(theta[-1]))

    def to_dict(self) -> dict:
        return {
            "signal_variance": self.signal_variance,
            "length_scales": self.length_scales.tolist(),
            "noise_variance": self.noise_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelHyperparams":
        return cls(d["signal_variance"], d["length_scales"], d["noise_variance"])


def _as_vectors(t, t_prime):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    tp = np.atleast_1d(np.asarray(t_prime, dtype=float))
    if t.shape != tp.shape:
        raise ValueError(f"dimension mismatch: {t.shape} vs {tp.shape}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(tp))):
        raise ValueError("kernel inputs must be finite")
    return t, tp


def rbf_eval(t, t_prime, params: KernelHyperparams) -> float:
    """sigma^2 exp(-|t - t'|^2 / (2 l^2)) with a single length-scale."""
    t, tp = _as_vectors(t, t_prime)
    diff = t - tp
    sq = float(np.sum(diff * diff))
    return params.signal_variance * np.exp(-0.5 * sq / params.lengthscale**2)


def rbf_grad_second_arg(t, t_prime, params: KernelHyperparams) -> np.ndarray:
    """Gradient of the RBF kernel with respect to its second argument."""
    t, tp = _as_vectors(t, t_prime)
    ell2 = params.lengthscale**2
    return (t - tp) / ell2 * rbf_eval(t, tp, params)


def rbf_hessian_mixed(t, t_prime, params: KernelHyperparams) -> np.ndarray:
    """Mixed second derivative d^2 k / dt_i dt'_j as a D x D matrix."""
    t, tp = _as_vectors(t, t_prime)
    ell2 = params.lengthscale**2
    diff = t - tp
    k = rbf_eval(t, tp, params)
    return (ell2 * np.eye(t.size) - np.outer(diff, diff)) / ell2**2 * k


def ard_eval(x, x_prime, params: KernelHyperparams) -> float:
    """v^2 exp(-0.5 sum_d ((x_d - x'_d) / lambda_d)^2)."""
    x, xp = _as_vectors(x, x_prime)
    if params.length_scales.shape != x.shape:
        raise ValueError(
            f"length_scales has {params.length_scales.size} entries, inputs have {x.size}"
        )
    z = (x - xp) / params.length_scales
    return params.signal_variance * np.exp(-0.5 * float(np.sum(z * z)))


def sq_dist(X: np.ndarray, Xp: np.ndarray, length_scales) -> np.ndarray:
    """Pairwise scaled squared distances, summed coordinatewise."""
    Xs = X / length_scales
    Xps = Xp / length_scales
    out = np.zeros((X.shape[0], Xp.shape[0]))
    for d in range(X.shape[1]):
        diff = Xs[:, d][:, None] - Xps[:, d][None, :]
        out += diff * diff
    return out


def _as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def gram_matrix(X, X_prime, params: KernelHyperparams, kernel: str = "rbf") -> np.ndarray:
    """Matrix of k(X[i], X'[j]) for kernel ``"rbf"`` (isotropic) or ``"ard"``.

    One-dimensional inputs are treated as a list of scalar time stamps.
    """
    X = _as_points(X)
    Xp = _as_points(X_prime)
    if X.shape[0] == 0 or Xp.shape[0] == 0:
        return np.zeros((X.shape[0], Xp.shape[0]))
    if X.shape[1] != Xp.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Xp.shape[1]}")
    if kernel == "rbf":
        ls = np.full(X.shape[1], params.lengthscale)
    elif kernel == "ard":
        ls = params.length_scales
        if ls.size != X.shape[1]:
            raise ValueError(f"ARD needs {X.shape[1]} length-scales, got {ls.size}")
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    return params.signal_variance * np.exp(-0.5 * sq_dist(X, Xp, ls))
