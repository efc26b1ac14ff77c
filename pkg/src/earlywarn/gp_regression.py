"""One-dimensional GP regression over time with derivative posteriors.

Each feature signal gets its own GP ``z(t) = g(t) + eps`` with an RBF
kernel.  Hyperparameters are fitted by minimizing the negative log marginal
likelihood in log-space with L-BFGS; the fitted model exposes the posterior
of ``g`` and of its time derivative ``dg/dt``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .kernels import KernelHyperparams, gram_matrix

log = logging.getLogger(__name__)

SCHEMA = "earlywarn.gp-regressor/1"
_LOG_2PI = np.log(2.0 * np.pi)


class GPNumericalError(ArithmeticError):
    """Cholesky factorization failed even after jitter escalation."""


class GPFitError(RuntimeError):
    """Every optimizer start failed."""


def _base_jitter(params: KernelHyperparams) -> float:
    return 1e-8 * params.signal_variance if params.noise_variance == 0 else 0.0


def stable_cholesky(C: np.ndarray, params: KernelHyperparams):
    """Lower Cholesky factor of ``C + jitter*I`` with bounded jitter escalation.

    Returns ``(L, jitter)``.  Jitter starts at 1e-8*sigma^2 only when the
    noise variance is zero and grows tenfold per failure up to 1e-2*sigma^2.
    """
    jitter = _base_jitter(params)
    cap = 1e-2 * params.signal_variance
    n = C.shape[0]
    while True:
        try:
            L = cholesky(C + jitter * np.eye(n), lower=True, check_finite=True)
            return L, jitter
        except (np.linalg.LinAlgError, ValueError):
            if jitter >= cap:
                raise GPNumericalError(
                    f"Cholesky failed with jitter {jitter:.3g} for params "
                    f"{params.to_dict()}"
                ) from None
            jitter = min(cap, max(jitter * 10.0, 1e-8 * params.signal_variance))


def nlml_and_gradient(params: KernelHyperparams, t, z):
    """Negative log marginal likelihood and its gradient in log-hyperparameters.

    The gradient is ordered ``(log sigma^2, log l, log sigma_n^2)``.
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    if t.shape != z.shape or t.ndim != 1:
        raise ValueError("t and z must be 1-D arrays of equal length")
    n = t.size
    K = gram_matrix(t, t, params)
    L, _ = stable_cholesky(K + params.noise_variance * np.eye(n), params)
    alpha = cho_solve((L, True), z)
    nlml = 0.5 * z @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * n * _LOG_2PI

    Cinv = cho_solve((L, True), np.eye(n))
    Q = Cinv - np.outer(alpha, alpha)
    r2 = (t[:, None] - t[None, :]) ** 2 / params.lengthscale**2
    grad = np.array([
        0.5 * np.sum(Q * K),
        0.5 * np.sum(Q * (K * r2)),
        0.5 * params.noise_variance * np.trace(Q),
    ])
    return float(nlml), grad


@dataclass(frozen=True)
class DerivativePosterior:
    mean: np.ndarray
    variance: np.ndarray


@dataclass(frozen=True)
class GPRegressor:
    """A conditioned GP.  ``params`` live in standardized-target units."""

    train_inputs: np.ndarray
    train_targets: np.ndarray
    params: KernelHyperparams
    chol_factor: np.ndarray
    alpha: np.ndarray
    y_mean: float = 0.0
    y_std: float = 1.0
    jitter: float = 0.0
    nlml: float = float("nan")

    @classmethod
    def condition(cls, t, z, params: KernelHyperparams, standardize: bool = False,
                  y_mean: float | None = None, y_std: float | None = None):
        """Condition a GP with fixed hyperparameters on ``(t, z)``."""
        t = np.asarray(t, dtype=float)
        z = np.asarray(z, dtype=float)
        if t.ndim != 1 or t.shape != z.shape:
            raise ValueError("t and z must be 1-D arrays of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("train_inputs must be strictly increasing")
        if y_mean is None or y_std is None:
            y_mean, y_std = _standardization(z) if standardize else (0.0, 1.0)
        zs = (z - y_mean) / y_std
        K = gram_matrix(t, t, params)
        n = t.size
        L, jitter = stable_cholesky(K + params.noise_variance * np.eye(n), params)
        alpha = cho_solve((L, True), zs)
        nlml = 0.5 * zs @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * n * _LOG_2PI
        return cls(t, z, params, L, alpha, float(y_mean), float(y_std), jitter, float(nlml))

    def _cross(self, t_query):
        tq = np.atleast_1d(np.asarray(t_query, dtype=float))
        return tq, gram_matrix(tq, self.train_inputs, self.params)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "hyperparams": self.params.to_dict(),
            "standardization": {"mean": self.y_mean, "std": self.y_std},
            "train_inputs": self.train_inputs.tolist(),
            "train_targets": self.train_targets.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GPRegressor":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported schema {d.get('schema')!r}")
        s = d["standardization"]
        return cls.condition(d["train_inputs"], d["train_targets"],
                             KernelHyperparams.from_dict(d["hyperparams"]),
                             y_mean=s["mean"], y_std=s["std"])


def _standardization(z):
    mean = float(np.mean(z))
    std = float(np.std(z))
    return mean, (std if std > 0 else 1.0)


def _fit_subset(t, z, max_points):
    # Contiguous block around the centre keeps the native sampling density,
    # which is what sets the fitted length-scale.
    n = t.size
    if max_points is None or n <= max_points:
        return t, z
    start = (n - max_points) // 2
    return t[start:start + max_points], z[start:start + max_points]


def fit(t, z, init: KernelHyperparams | None = None, restarts: int = 3, seed=0,
        max_iter: int = 100, gtol: float = 1e-6, standardize: bool = True,
        max_fit_points: int | None = None,
        max_lengthscale: float | None = None,
        min_lengthscale: float | None = None) -> GPRegressor:
    """Fit RBF hyperparameters by NLML minimization and condition on all data.

    The initialization is always tried; ``restarts`` extra starts are drawn
    log-uniformly within a factor of [1e-2, 1e2] of it.  The best start
    by NLML wins.  With ``max_fit_points`` the hyperparameters are learned
    on a contiguous central block, then the model conditions on every point.
    The length-scale lies in [``min_lengthscale``, ``max_lengthscale``],
    defaulting to [0.1 * median spacing, 100 * span].
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    if t.size < 4:
        raise ValueError("fit needs at least 4 points")
    if not np.all(np.isfinite(z)):
        raise ValueError("targets must be finite")
    if np.any(np.diff(t) <= 0):
        raise ValueError("train_inputs must be strictly increasing")
    y_mean, y_std = _standardization(z) if standardize else (0.0, 1.0)
    zs = (z - y_mean) / y_std
    tf, zf = _fit_subset(t, zs, max_fit_points)

    span = float(t[-1] - t[0])
    if (min_lengthscale is not None and max_lengthscale is not None
            and min_lengthscale > max_lengthscale):
        raise ValueError("min_lengthscale exceeds max_lengthscale")
    spacing = float(np.median(np.diff(t)))
    if init is None:
        init = KernelHyperparams(1.0, [span / 10.0], 0.1)
    bounds = [
        (np.log(1e-4), np.log(1e4)),
        (np.log(0.1 * spacing if min_lengthscale is None else min_lengthscale),
         np.log(100.0 * span if max_lengthscale is None else max_lengthscale)),
        (np.log(1e-8), np.log(1e2)),
    ]
    theta0 = np.clip(init.to_log(), [b[0] for b in bounds], [b[1] for b in bounds])
    rng = np.random.default_rng(seed)
    starts = [theta0] + [
        np.clip(theta0 + rng.uniform(np.log(1e-2), np.log(1e2), size=3),
                [b[0] for b in bounds], [b[1] for b in bounds])
        for _ in range(restarts)
    ]

    def objective(theta):
        try:
            return nlml_and_gradient(KernelHyperparams.from_log(theta), tf, zf)
        except GPNumericalError:
            return 1e25, np.zeros_like(theta)

    best = None
    failures = []
    for theta in starts:
        start_val, _ = objective(theta)
        try:
            res = minimize(objective, theta, jac=True, method="L-BFGS-B", bounds=bounds,
                           options={"maxiter": max_iter, "gtol": gtol})
        except (ValueError, FloatingPointError) as exc:
            failures.append(str(exc))
            continue
        theta_opt, val = res.x, float(res.fun)
        if val > start_val:
            theta_opt, val = theta, start_val
        if val >= 1e25:
            failures.append(f"start {theta} numerically infeasible")
            continue
        if best is None or val < best[1]:
            best = (theta_opt, val)
    if best is None:
        raise GPFitError(f"all {len(starts)} starts failed: {failures}")
    params = KernelHyperparams.from_log(best[0])
    log.debug("GP fit: %s nlml=%.4f", params.to_dict(), best[1])
    return GPRegressor.condition(t, z, params, y_mean=y_mean, y_std=y_std)


def posterior_mean_cov(model: GPRegressor, t_query):
    """Posterior mean and covariance of g at ``t_query`` (target units)."""
    tq, Ks = model._cross(t_query)
    mean = Ks @ model.alpha * model.y_std + model.y_mean
    V = solve_triangular(model.chol_factor, Ks.T, lower=True)
    cov = gram_matrix(tq, tq, model.params) - V.T @ V
    cov = 0.5 * (cov + cov.T) * model.y_std**2
    return mean, cov


def derivative_posterior(model: GPRegressor, t_query) -> DerivativePosterior:
    """Posterior of dg/dt at ``t_query``.

    Mean is sum_i dk(t_i, t')/dt' alpha_i, the exact derivative of the
    posterior mean; variance is d^2k(t', t')/dt dt' minus the explained part.
    """
    tq, Ks = model._cross(t_query)
    ell2 = model.params.lengthscale**2
    G = (model.train_inputs[None, :] - tq[:, None]) / ell2 * Ks
    mean = G @ model.alpha * model.y_std
    V = solve_triangular(model.chol_factor, G.T, lower=True)
    var = model.params.signal_variance / ell2 - np.sum(V * V, axis=0)
    var = np.maximum(var, 0.0) * model.y_std**2
    return DerivativePosterior(mean=mean, variance=var)
