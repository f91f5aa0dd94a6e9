"""Exact Gaussian-process regression with a squared-exponential kernel.

One independent single-output GP per objective. Outputs are standardized
before fitting, hyperparameters maximize the log marginal likelihood with a
multi-start bounded L-BFGS search in log space, and the Cholesky factor of
``K + noise * I`` is cached for O(n^2) prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .errors import DimensionError, IllConditionedError, StateError
from .qmc import sobol_normals

LENGTH_SCALE_BOUNDS = (1e-3, 1e3)
SIGNAL_VARIANCE_BOUNDS = (1e-6, 1e3)
NOISE_VARIANCE_BOUNDS = (1e-8, 1e1)
_LOG_BOUNDS = np.log([LENGTH_SCALE_BOUNDS, SIGNAL_VARIANCE_BOUNDS, NOISE_VARIANCE_BOUNDS])

JITTER_START = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class KernelParams:
    length_scale: float = 0.5
    signal_variance: float = 1.0
    noise_variance: float = 1e-4

    def as_log(self) -> np.ndarray:
        return np.log([self.length_scale, self.signal_variance, self.noise_variance])

    @classmethod
    def from_log(cls, v) -> KernelParams:
        lo, hi = _LOG_BOUNDS[:, 0], _LOG_BOUNDS[:, 1]
        v = np.clip(np.asarray(v, dtype=float), lo, hi)
        return cls(float(math.exp(v[0])), float(math.exp(v[1])), float(math.exp(v[2])))

    def to_dict(self) -> dict:
        return {"length_scale": self.length_scale, "signal_variance": self.signal_variance,
                "noise_variance": self.noise_variance}

    @classmethod
    def from_dict(cls, doc: dict) -> KernelParams:
        return cls(float(doc["length_scale"]), float(doc["signal_variance"]),
                   float(doc["noise_variance"]))


def sq_dist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of ``A`` and ``B``."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def se_kernel(x, x_prime, params: KernelParams) -> float:
    """``sigma_f^2 * exp(-|x - x'|^2 / (2 theta^2))`` for a single pair."""
    x = np.asarray(x, dtype=float).reshape(-1)
    xp = np.asarray(x_prime, dtype=float).reshape(-1)
    if x.shape != xp.shape:
        raise DimensionError(f"dimension mismatch: {x.shape[0]} vs {xp.shape[0]}")
    r2 = float(np.dot(x - xp, x - xp))
    return params.signal_variance * math.exp(-r2 / (2.0 * params.length_scale ** 2))


def kernel_matrix(A, B, params: KernelParams) -> np.ndarray:
    return params.signal_variance * np.exp(-sq_dist(A, B) / (2.0 * params.length_scale ** 2))


def robust_cholesky(A: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, escalating diagonal jitter 1e-10 -> 1e-4 on failure."""
    try:
        return cholesky(A, lower=True, check_finite=False), 0.0
    except LinAlgError:
        pass
    jitter = JITTER_START
    eye = np.eye(A.shape[0])
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return cholesky(A + jitter * eye, lower=True, check_finite=False), jitter
        except LinAlgError:
            jitter *= 10.0
    raise IllConditionedError(
        f"Cholesky failed on a {A.shape[0]}x{A.shape[0]} matrix even with jitter {JITTER_MAX:g}")


@dataclass(frozen=True, eq=False)
class GpModel:
    """A fitted GP. Immutable; safe to share between threads."""

    train_x: np.ndarray
    train_y_standardized: np.ndarray
    y_mean: float
    y_std: float
    params: KernelParams
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = 0.0

    @property
    def n(self) -> int:
        return self.train_x.shape[0]

    @property
    def d(self) -> int:
        return self.train_x.shape[1]

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        return predict(self, X)

    def log_marginal_likelihood(self) -> float:
        return float(-0.5 * self.train_y_standardized @ self.alpha
                     - np.log(np.diag(self.chol)).sum()
                     - 0.5 * self.n * math.log(2 * math.pi))


def _standardize(y: np.ndarray) -> tuple[np.ndarray, float, float]:
    mean = float(y.mean())
    std = float(y.std())
    if not np.isfinite(std) or std < 1e-12 * max(1.0, abs(mean)):
        std = 1.0
    return (y - mean) / std, mean, std


def build_model(X, y, params: KernelParams) -> GpModel:
    """Condition a GP with fixed hyperparameters on ``(X, y)`` (no fitting)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise DimensionError(f"{X.shape[0]} inputs but {y.shape[0]} outputs")
    if X.shape[0] < 1:
        raise StateError("cannot condition a GP on zero points")
    ys, mean, std = _standardize(y)
    K = kernel_matrix(X, X, params)
    K[np.diag_indices_from(K)] += params.noise_variance
    L, jitter = robust_cholesky(K)
    alpha = cho_solve((L, True), ys, check_finite=False)
    return GpModel(X.copy(), ys, mean, std, params, L, alpha, jitter)


def _neg_lml_and_grad(logp: np.ndarray, D2: np.ndarray, y: np.ndarray):
    theta2 = math.exp(2.0 * logp[0])
    sf2 = math.exp(logp[1])
    sn2 = math.exp(logp[2])
    n = y.shape[0]
    E = np.exp(-D2 / (2.0 * theta2))
    K = sf2 * E
    Ky = K.copy()
    Ky[np.diag_indices(n)] += sn2
    try:
        L, _ = robust_cholesky(Ky)
    except IllConditionedError:
        return 1e25, np.zeros(3)
    alpha = cho_solve((L, True), y, check_finite=False)
    lml = -0.5 * y @ alpha - np.log(np.diag(L)).sum() - 0.5 * n * math.log(2 * math.pi)
    Linv = solve_triangular(L, np.eye(n), lower=True, check_finite=False)
    Kinv = Linv.T @ Linv
    W = np.outer(alpha, alpha) - Kinv
    g_theta = 0.5 * np.sum(W * (K * D2 / theta2))
    g_sf = 0.5 * np.sum(W * K)
    g_sn = 0.5 * sn2 * np.trace(W)
    return -lml, -np.array([g_theta, g_sf, g_sn])


def log_marginal_likelihood(X, y, params: KernelParams) -> float:
    """LML of standardized ``y`` under ``params`` (what :func:`fit` maximizes)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ys, _, _ = _standardize(np.asarray(y, dtype=float).reshape(-1))
    val, _ = _neg_lml_and_grad(params.as_log(), sq_dist(X, X), ys)
    return -val


def initial_guesses(n_restarts: int, seed: int | None,
                    warm_start: KernelParams | None = None) -> list[np.ndarray]:
    """Deterministic restart points in log-parameter space.

    The first start is the warm start (or a neutral default); the rest are
    log-uniform over a sensible sub-box of the fitting bounds.
    """
    first = (warm_start or KernelParams()).as_log()
    rng = np.random.default_rng(seed)
    lo = np.log([0.05, 0.1, 1e-6])
    hi = np.log([2.0, 5.0, 1e-1])
    starts = [first]
    for _ in range(max(0, n_restarts - 1)):
        starts.append(rng.uniform(lo, hi))
    return starts


def fit(X, y, *, n_restarts: int = 8, seed: int | None = 0,
        warm_start: KernelParams | None = None, maxiter: int = 60) -> GpModel:
    """Fit hyperparameters by maximizing the log marginal likelihood.

    Parameters
    ----------
    X : (n, d) array of normalized inputs.
    y : (n,) array of one objective, original units.
    n_restarts : number of L-BFGS-B starts (the first is ``warm_start``).
    seed : seeds the restart positions.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise DimensionError(f"{X.shape[0]} inputs but {y.shape[0]} outputs")
    if X.shape[0] < 2:
        raise StateError("fitting a GP needs at least two observations")
    ys, _, _ = _standardize(y)
    D2 = sq_dist(X, X)
    best_val, best_logp = np.inf, None
    for start in initial_guesses(n_restarts, seed, warm_start):
        start_val, _ = _neg_lml_and_grad(start, D2, ys)
        if start_val < best_val:
            best_val, best_logp = start_val, start
        res = minimize(_neg_lml_and_grad, start, args=(D2, ys), jac=True,
                       method="L-BFGS-B", bounds=_LOG_BOUNDS,
                       options={"maxiter": maxiter})
        if np.isfinite(res.fun) and res.fun < best_val:
            best_val, best_logp = float(res.fun), np.asarray(res.x)
    return build_model(X, y, KernelParams.from_log(best_logp))


def _check_x(model: GpModel, X) -> np.ndarray:
    if model is None or not isinstance(model, GpModel):
        raise StateError("predict() needs a fitted GpModel")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.d:
        raise DimensionError(f"model has d={model.d}, got points with d={X.shape[1]}")
    return X


def predict(model: GpModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at each row of ``X`` (original units)."""
    X = _check_x(model, X)
    Ks = kernel_matrix(X, model.train_x, model.params)
    mean = Ks @ model.alpha
    v = solve_triangular(model.chol, Ks.T, lower=True, check_finite=False)
    var = model.params.signal_variance - np.einsum("ij,ij->j", v, v)
    var = np.maximum(var, 0.0)
    return model.y_mean + model.y_std * mean, var * model.y_std ** 2


def posterior_cov(model: GpModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean ``(..., q)`` and covariance ``(..., q, q)`` for batches ``(..., q, d)``."""
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != model.d:
        raise DimensionError(f"model has d={model.d}, got points with d={X.shape[-1]}")
    lead, q = X.shape[:-2], X.shape[-2]
    flat = X.reshape(-1, model.d)
    Ks = kernel_matrix(flat, model.train_x, model.params)
    mean = (Ks @ model.alpha).reshape(*lead, q)
    v = solve_triangular(model.chol, Ks.T, lower=True, check_finite=False)
    v = v.T.reshape(*lead, q, model.n)
    Xb = X.reshape(-1, q, model.d)
    prior = np.stack([kernel_matrix(b, b, model.params) for b in Xb]).reshape(*lead, q, q)
    cov = prior - v @ np.swapaxes(v, -1, -2)
    cov = 0.5 * (cov + np.swapaxes(cov, -1, -2))
    return model.y_mean + model.y_std * mean, cov * model.y_std ** 2


def batched_cholesky(cov: np.ndarray) -> np.ndarray:
    """Cholesky of a stack of PSD matrices with per-stack jitter escalation."""
    q = cov.shape[-1]
    scale = np.maximum(np.max(np.abs(np.diagonal(cov, axis1=-2, axis2=-1)), axis=-1), 1e-300)
    eye = np.eye(q)
    try:
        return np.linalg.cholesky(cov + 1e-12 * scale[..., None, None] * eye)
    except np.linalg.LinAlgError:
        pass
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        try:
            return np.linalg.cholesky(cov + jitter * scale[..., None, None] * eye)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    # eigen fallback: clamp negative eigenvalues and use the symmetric square root
    w, V = np.linalg.eigh(cov)
    if np.any(w < -JITTER_MAX * scale[..., None]):
        raise IllConditionedError("posterior covariance is not positive semi-definite")
    return V * np.sqrt(np.maximum(w, 0.0))[..., None, :]


def joint_posterior_sample(models: Sequence[GpModel], X, draws: int,
                           quasi_random: bool = True, seed: int | None = 0,
                           base_normals: np.ndarray | None = None) -> np.ndarray:
    """Joint posterior draws at the ``q`` points of ``X``.

    Objectives are independent; within one objective the ``q`` points are
    sampled jointly from their posterior covariance. Returns an array of
    shape ``(draws, q, m)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    q, m = X.shape[0], len(models)
    if q < 1:
        raise DimensionError("need at least one point")
    if base_normals is None:
        base_normals = standard_normals(draws, q, m, quasi_random, seed)
    out = np.empty((draws, q, m))
    for k, model in enumerate(models):
        mean, cov = posterior_cov(model, X)
        L = batched_cholesky(cov)
        out[:, :, k] = mean + base_normals[:draws, :q, k] @ L.T
    return out


def standard_normals(draws: int, q: int, m: int, quasi_random: bool = True,
                     seed: int | None = 0) -> np.ndarray:
    """Base N(0, 1) samples of shape ``(draws, q, m)``."""
    if quasi_random:
        z = sobol_normals(draws, q * m, seed)
    else:
        z = np.random.default_rng(seed).standard_normal((draws, q * m))
    return z.reshape(draws, q, m)


__all__ = [
    "KernelParams", "GpModel", "se_kernel", "kernel_matrix", "fit", "build_model", "predict",
    "posterior_cov", "joint_posterior_sample", "standard_normals", "log_marginal_likelihood",
    "robust_cholesky",
]
