"""
Epsilon-insensitive support vector regression with an RBF kernel.

The dual over (alpha, alpha*) is solved as one box-constrained problem over
2l variables by sequential minimal optimization: each step picks the pair
with second-order working-set selection, solves it analytically and clips it
to the box. Features are standardized before training; targets stay in mmHg
so epsilon keeps its unit.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import EmptyTraining, ModelError, NoConvergence
from .base import (ModelCodec, ModelKind, Standardizer, TrainedModel, check_training, default_feature_names,
                   register_codec)

logger = logging.getLogger(__name__)

TAU = 1e-12


@dataclass(frozen=True)
class SvrConfig:
    c: float = 1e3
    epsilon: float = 0.1
    kernel: str = "rbf"
    gamma: Optional[float] = None  # None: 1 / (p * mean feature variance)
    tol: float = 1e-3
    max_passes: int = 200

    def validate(self) -> None:
        if self.kernel != "rbf":
            raise ModelError(f"Unsupported kernel {self.kernel!r}", kernel=self.kernel)
        if self.c <= 0 or self.epsilon < 0 or (self.gamma is not None and self.gamma <= 0):
            raise ModelError("SVR needs c > 0, epsilon >= 0 and gamma > 0",
                             c=self.c, epsilon=self.epsilon, gamma=self.gamma)


@dataclass(frozen=True, eq=False)
class SvrParams:
    support_vectors: np.ndarray
    coef: np.ndarray
    intercept: float
    gamma: float
    alpha: np.ndarray
    alpha_star: np.ndarray
    objective: float
    n_iter: int

    def decision(self, Z: np.ndarray) -> np.ndarray:
        if len(self.coef) == 0:
            return np.full(len(Z), self.intercept)
        return rbf_kernel(Z, self.support_vectors, self.gamma) @ self.coef + self.intercept

    def to_dict(self) -> Dict[str, Any]:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "coef": self.coef.tolist(),
            "intercept": self.intercept,
            "gamma": self.gamma,
            "alpha": self.alpha.tolist(),
            "alpha_star": self.alpha_star.tolist(),
            "objective": self.objective,
            "n_iter": self.n_iter,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SvrParams":
        coef = np.asarray(data["coef"], dtype=float)
        sv = np.asarray(data["support_vectors"], dtype=float).reshape(len(coef), -1)
        return cls(sv, coef, float(data["intercept"]), float(data["gamma"]),
                   np.asarray(data["alpha"], dtype=float), np.asarray(data["alpha_star"], dtype=float),
                   float(data["objective"]), int(data["n_iter"]))


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * cdist(A, B, "sqeuclidean"))


def default_gamma(Z: np.ndarray) -> float:
    variance = float(Z.var(axis=0).mean())
    return 1.0 / (Z.shape[1] * variance) if variance > 0 else 1.0 / Z.shape[1]


def dual_objective(K: np.ndarray, y: np.ndarray, alpha: np.ndarray, alpha_star: np.ndarray, epsilon: float) -> float:
    """0.5 * b'Kb + eps * sum(alpha + alpha*) - y'b with b = alpha - alpha* (minimized)."""
    beta = alpha - alpha_star
    return float(0.5 * beta @ K @ beta + epsilon * np.sum(alpha + alpha_star) - y @ beta)


def solve_dual(K: np.ndarray, y: np.ndarray, c: float, epsilon: float, tol: float = 1e-3,
               max_iter: int = 100000):
    """
    Minimize 0.5 a'Qa + p'a subject to s'a = 0 and 0 <= a <= c.

    Returns (alpha, alpha_star, b, n_iter) with the prediction
    ``sum((alpha - alpha_star) * K(x_i, x)) + b``.
    """
    n = len(y)
    sign = np.concatenate([np.ones(n), -np.ones(n)])
    a = np.zeros(2 * n)
    grad = np.concatenate([epsilon - y, epsilon + y])
    diag = np.concatenate([np.diag(K), np.diag(K)])
    base = np.concatenate([np.arange(n), np.arange(n)])

    def q_column(i: int) -> np.ndarray:
        return sign[i] * sign * K[base[i], base]

    n_iter = 0
    while True:
        up = np.where(sign > 0, a < c, a > 0)
        low = np.where(sign > 0, a > 0, a < c)
        minus_yg = -sign * grad
        if not up.any() or not low.any():
            break
        i = int(np.argmax(np.where(up, minus_yg, -np.inf)))
        g_max = minus_yg[i]
        g_max2 = float(np.max(np.where(low, -minus_yg, -np.inf)))
        if g_max + g_max2 < tol:
            break
        if n_iter >= max_iter:
            raise NoConvergence(f"SMO did not reach tol={tol} within {max_iter} iterations",
                                stage="regress", max_iter=max_iter, gap=float(g_max + g_max2))

        k_i = K[base[i], base]
        grad_diff = g_max - minus_yg
        quad = diag[i] + diag - 2.0 * k_i
        quad = np.where(quad > 0, quad, TAU)
        candidates = low & (grad_diff > 0)
        if not candidates.any():
            break
        gain = np.where(candidates, -(grad_diff ** 2) / quad, np.inf)
        j = int(np.argmin(gain))

        q_i, q_j = q_column(i), q_column(j)
        old_i, old_j = a[i], a[j]
        if sign[i] != sign[j]:
            qc = diag[i] + diag[j] + 2.0 * q_i[j]
            delta = (-grad[i] - grad[j]) / (qc if qc > 0 else TAU)
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j], a[i] = 0.0, diff
            elif a[i] < 0:
                a[i], a[j] = 0.0, -diff
            if diff > 0:
                if a[i] > c:
                    a[i], a[j] = c, c - diff
            elif a[j] > c:
                a[j], a[i] = c, c + diff
        else:
            qc = diag[i] + diag[j] - 2.0 * q_i[j]
            delta = (grad[i] - grad[j]) / (qc if qc > 0 else TAU)
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > c:
                if a[i] > c:
                    a[i], a[j] = c, total - c
            elif a[j] < 0:
                a[j], a[i] = 0.0, total
            if total > c:
                if a[j] > c:
                    a[j], a[i] = c, total - c
            elif a[i] < 0:
                a[i], a[j] = 0.0, total
        grad += q_i * (a[i] - old_i) + q_j * (a[j] - old_j)
        n_iter += 1

    yg = sign * grad
    at_upper, at_lower = a >= c, a <= 0
    free = ~at_upper & ~at_lower
    if free.any():
        rho = float(yg[free].mean())
    else:
        ub_mask = (at_upper & (sign < 0)) | (at_lower & (sign > 0))
        lb_mask = (at_upper & (sign > 0)) | (at_lower & (sign < 0))
        ub = float(yg[ub_mask].min()) if ub_mask.any() else np.inf
        lb = float(yg[lb_mask].max()) if lb_mask.any() else -np.inf
        rho = 0.5 * (ub + lb)
    return a[:n].copy(), a[n:].copy(), -rho, n_iter


def train_svr(X: np.ndarray, y: np.ndarray, config: SvrConfig = SvrConfig(),
              feature_names: Optional[Sequence[str]] = None) -> TrainedModel:
    X, y = check_training(X, y)
    config.validate()
    if len(X) < 2:
        raise EmptyTraining("SVR needs at least 2 rows", stage="regress", n_rows=len(X))
    std = Standardizer.fit(X)
    Z = std.transform(X)
    gamma = config.gamma if config.gamma is not None else default_gamma(Z)
    K = rbf_kernel(Z, Z, gamma)
    max_iter = config.max_passes * 2 * len(y)
    alpha, alpha_star, b, n_iter = solve_dual(K, y, config.c, config.epsilon, config.tol, max_iter)

    coef = alpha - alpha_star
    support = coef != 0
    params = SvrParams(
        support_vectors=Z[support],
        coef=coef[support],
        intercept=float(b),
        gamma=float(gamma),
        alpha=alpha,
        alpha_star=alpha_star,
        objective=dual_objective(K, y, alpha, alpha_star, config.epsilon),
        n_iter=n_iter,
    )
    logger.info("Trained SVR: %d support vectors of %d rows in %d iterations", int(support.sum()), len(y), n_iter)
    provenance = {"c": config.c, "epsilon": config.epsilon, "gamma": float(gamma), "tol": config.tol,
                  "max_passes": config.max_passes, "n_rows": len(X)}
    return TrainedModel(ModelKind.SVR, params, default_feature_names(X.shape[1], feature_names), std, provenance)


def _predict(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    return model.parameters.decision(model.standardizer.transform(X))


register_codec(ModelKind.SVR, ModelCodec(_predict, SvrParams.to_dict, SvrParams.from_dict))
