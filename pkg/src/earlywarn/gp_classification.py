"""Binary GP classification with a probit link and the Laplace approximation.

The classifier exists to learn ARD length-scales: after maximizing the
approximate marginal likelihood, small length-scales flag the features most
relevant to the label.  Newton mode-finding, prediction and the marginal
likelihood gradient follow the standard Laplace recipes for log-concave
likelihoods (Rasmussen & Williams, Algorithms 3.1, 3.2 and 5.1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.special import log_ndtr, ndtr

from .kernels import KernelHyperparams, gram_matrix, sq_dist


class LaplaceConvergenceError(ArithmeticError):
    pass


def _probit_derivs(f, y):
    """log p(y|f) and its first three derivatives in f, for y in {-1, +1}."""
    z = y * f
    logp = log_ndtr(z)
    r = np.exp(-0.5 * z * z - 0.5 * np.log(2 * np.pi) - logp)
    d1 = y * r
    zr = z + r
    d2 = -r * zr
    d3 = y * (r * zr * zr - r + r * r * zr)
    return logp, d1, d2, d3


def _laplace_mode(K, y, f0=None, tol=1e-8, max_iter=100):
    """Newton iterations for the posterior mode; returns a dict of factors."""
    n = K.shape[0]
    f = np.zeros(n) if f0 is None else f0.copy()
    a = np.zeros(n) if f0 is None else None
    obj_old = -np.inf
    for it in range(max_iter):
        logp, d1, d2, _ = _probit_derivs(f, y)
        W = -d2
        sW = np.sqrt(W)
        B = np.eye(n) + sW[:, None] * K * sW[None, :]
        L = cholesky(B, lower=True)
        b = W * f + d1
        a_new = b - sW * cho_solve((L, True), sW * (K @ b))
        # step halving guards the rare non-monotone Newton step
        step = 1.0
        while True:
            a_try = a_new if step == 1.0 or a is None else a + step * (a_new - a)
            f_try = K @ a_try
            obj = -0.5 * a_try @ f_try + np.sum(log_ndtr(y * f_try))
            if obj >= obj_old - 1e-12 or step < 1e-4 or a is None:
                break
            step *= 0.5
        a, f = a_try, f_try
        converged = abs(obj - obj_old) < tol
        obj_old = obj
        if converged:
            logp, d1, d2, d3 = _probit_derivs(f, y)
            if np.max(np.abs(d1 - a)) < 1e-6:
                break
    else:
        raise LaplaceConvergenceError(f"Newton did not converge in {max_iter} iterations")
    W = -d2
    sW = np.sqrt(W)
    L = cholesky(np.eye(n) + sW[:, None] * K * sW[None, :], lower=True)
    logq = -0.5 * a @ f + np.sum(logp) - np.sum(np.log(np.diag(L)))
    return dict(f=f, a=a, d1=d1, d3=d3, sW=sW, L=L, logq=float(logq))


def _to_pm(y):
    y = np.asarray(y)
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0/1")
    return np.where(y == 1, 1.0, -1.0)


def laplace_objective(theta, X, ypm, f0=None):
    """Negative approximate log marginal likelihood and its gradient.

    ``theta = [log v^2, log lambda_1..lambda_D]``.
    """
    v2 = np.exp(theta[0])
    ls = np.exp(theta[1:])
    K = v2 * np.exp(-0.5 * sq_dist(X, X, ls))
    m = _laplace_mode(K, ypm, f0)
    sW, L, a, d1, d3 = m["sW"], m["L"], m["a"], m["d1"], m["d3"]
    R = sW[:, None] * cho_solve((L, True), np.diag(sW))
    C = solve_triangular(L, sW[:, None] * K, lower=True)
    # d log q / d f_i = +0.5 [(K^-1 + W)^-1]_ii d^3 log p / df_i^3 (W = -d2 log p)
    s2 = 0.5 * (np.diag(K) - np.sum(C * C, axis=0)) * d3
    grads = np.empty(theta.size)
    for j in range(theta.size):
        if j == 0:
            dK = K
        else:
            x = X[:, j - 1] / ls[j - 1]
            dK = K * (x[:, None] - x[None, :]) ** 2
        s1 = 0.5 * a @ dK @ a - 0.5 * np.sum(R * dK)
        b = dK @ d1
        s3 = b - K @ (R @ b)
        grads[j] = s1 + s2 @ s3
    return -m["logq"], -grads, m["f"]


@dataclass(frozen=True)
class GPClassifier:
    train_X: np.ndarray
    train_y: np.ndarray
    params: KernelHyperparams
    mode: np.ndarray
    grad_logp: np.ndarray
    sqrt_W: np.ndarray
    chol_B: np.ndarray
    log_marginal: float
    mode_weights: np.ndarray  # a with mode = K a, i.e. K^-1 mode

    @property
    def stationarity_residual(self) -> float:
        """max |grad log p(y|f) - K^-1 f| at the stored mode."""
        _, d1, _, _ = _probit_derivs(self.mode, _to_pm(self.train_y))
        return float(np.max(np.abs(d1 - self.mode_weights)))


def _condition(X, y, params: KernelHyperparams) -> GPClassifier:
    ypm = _to_pm(y)
    K = gram_matrix(X, X, params, kernel="ard")
    m = _laplace_mode(K, ypm)
    return GPClassifier(X, np.asarray(y), params, m["f"], m["d1"], m["sW"], m["L"], m["logq"],
                        m["a"])


def fit_laplace(X, y, init: KernelHyperparams | None = None, optimize: bool = True,
                restarts: int = 0, seed=0, max_iter: int = 100, gtol: float = 1e-6,
                max_signal_variance: float = 10.0) -> GPClassifier:
    """Fit the probit GP classifier, optimizing log v^2 and log ARD length-scales."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y).astype(int)
    N, D = X.shape
    if N < 10:
        raise ValueError("need at least 10 observations")
    if y.shape != (N,):
        raise ValueError("y must have one label per row")
    if np.unique(y).size < 2:
        raise ValueError("both classes must be present")
    ypm = _to_pm(y)
    if init is None:
        init = KernelHyperparams(1.0, np.ones(D))
    if init.length_scales.size != D:
        raise ValueError(f"init has {init.length_scales.size} length-scales for {D} features")
    if not optimize:
        return _condition(X, y, init)

    lo = np.r_[np.log(1e-2), np.full(D, np.log(1e-2))]
    # latent std beyond ~3 is unidentifiable under a probit link
    hi = np.r_[np.log(max_signal_variance), np.full(D, np.log(1e3))]
    theta0 = np.clip(np.r_[np.log(init.signal_variance), np.log(init.length_scales)], lo, hi)
    rng = np.random.default_rng(seed)
    starts = [theta0] + [np.clip(theta0 + rng.uniform(np.log(1e-2), np.log(1e2), theta0.size), lo, hi)
                         for _ in range(restarts)]
    best = None
    for th in starts:
        cache = {"f": None}

        def obj(theta):
            try:
                val, grad, f = laplace_objective(theta, X, ypm, cache["f"])
            except (np.linalg.LinAlgError, LaplaceConvergenceError):
                return 1e25, np.zeros_like(theta)
            cache["f"] = f
            return val, grad

        start_val = obj(th)[0]
        res = minimize(obj, th, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)),
                       options={"maxiter": max_iter, "gtol": gtol})
        theta, val = (res.x, res.fun) if res.fun <= start_val else (th, start_val)
        if best is None or val < best[1]:
            best = (theta, val)
    if best[1] >= 1e25:
        raise LaplaceConvergenceError("no start produced a finite objective")
    params = KernelHyperparams(np.exp(best[0][0]), np.exp(best[0][1:]))
    return _condition(X, y, params)


def predict_latent(model: GPClassifier, X_query):
    Xq = np.atleast_2d(np.asarray(X_query, dtype=float))
    if Xq.shape[1] != model.train_X.shape[1]:
        raise ValueError(f"query has {Xq.shape[1]} features, model has {model.train_X.shape[1]}")
    Ks = gram_matrix(Xq, model.train_X, model.params, kernel="ard")
    mean = Ks @ model.grad_logp
    v = solve_triangular(model.chol_B, (model.sqrt_W[:, None] * Ks.T), lower=True)
    var = model.params.signal_variance - np.sum(v * v, axis=0)
    return mean, np.maximum(var, 0.0)


def predict_prob(model: GPClassifier, x_query):
    """P(y=1 | x) = Phi(mean / sqrt(1 + var)) under the Laplace posterior.

    Returns a float for a single query vector, an array for a matrix.
    """
    xq = np.asarray(x_query, dtype=float)
    mean, var = predict_latent(model, xq)
    p = ndtr(mean / np.sqrt(1.0 + var))
    p = np.clip(p, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return float(p[0]) if xq.ndim == 1 else p


def select_features(lengthscales, threshold: float = 0.45) -> list:
    """Indices with length-scale strictly below ``threshold``, sorted by length-scale."""
    ls = np.asarray(lengthscales, dtype=float)
    idx = [int(i) for i in np.flatnonzero(ls < threshold)]
    return sorted(idx, key=lambda i: (ls[i], i))


def relevance_report(lengthscales, names=None) -> list:
    """(feature, length-scale) pairs ordered from most to least relevant."""
    ls = np.asarray(lengthscales, dtype=float)
    names = list(range(ls.size)) if names is None else list(names)
    order = sorted(range(ls.size), key=lambda i: (ls[i], i))
    return [{"feature": names[i], "lengthscale": float(ls[i])} for i in order]
