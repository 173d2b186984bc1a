"""Ordinary least squares with intercept, fitted on standardized features."""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence

import numpy as np

from ..errors import SingularDesign
from .base import (ModelCodec, ModelKind, Standardizer, TrainedModel, check_training, default_feature_names,
                   register_codec)

logger = logging.getLogger(__name__)

RIDGE_FALLBACK = "RidgeFallback"


@dataclass(frozen=True, eq=False)
class LinearParams:
    """Coefficients in raw feature units."""
    coef: np.ndarray
    intercept: float

    def to_dict(self) -> Dict[str, Any]:
        return {"coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LinearParams":
        return cls(np.asarray(data["coef"], dtype=float), float(data["intercept"]))


def train_lr(X: np.ndarray, y: np.ndarray, feature_names: Optional[Sequence[str]] = None) -> TrainedModel:
    X, y = check_training(X, y)
    n, p = X.shape
    names = default_feature_names(p, feature_names)
    std = Standardizer.fit(X)
    flags = ()
    if np.ptp(y) == 0:
        params = LinearParams(np.zeros(p), float(y[0]))
        return TrainedModel(ModelKind.LR, params, names, std, {"n_rows": n}, flags)

    Z = np.column_stack([np.ones(n), std.transform(X)])
    w, _, rank, _ = np.linalg.lstsq(Z, y, rcond=None)
    if rank < p + 1:
        # Collinear or underdetermined design: damp the feature block slightly
        damping = 1e-8 * max(1.0, float(np.trace(Z.T @ Z)) / (p + 1))
        penalty = damping * np.eye(p + 1)
        penalty[0, 0] = 0.0
        try:
            w = np.linalg.solve(Z.T @ Z + penalty, Z.T @ y)
        except np.linalg.LinAlgError as exc:
            raise SingularDesign(f"Ridge fallback failed: {exc}", rank=int(rank)) from exc
        if not np.all(np.isfinite(w)):
            raise SingularDesign("Ridge fallback produced non-finite coefficients", rank=int(rank))
        flags = (RIDGE_FALLBACK,)
        logger.warning("Linear design has rank %d < %d; used ridge fallback", rank, p + 1)

    coef = w[1:] / std.scale
    intercept = float(w[0] - coef @ std.mean)
    return TrainedModel(ModelKind.LR, LinearParams(coef, intercept), names, std, {"n_rows": n}, flags)


def _predict(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    params: LinearParams = model.parameters
    return X @ params.coef + params.intercept


register_codec(ModelKind.LR, ModelCodec(_predict, LinearParams.to_dict, LinearParams.from_dict))
