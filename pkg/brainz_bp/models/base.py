"""
Common model container, standardization, prediction dispatch and persistence.

Each regressor module registers a codec (predict function plus parameter
(de)serialization) for its kind. Models are saved as self-describing JSON;
floats are written with their shortest round-trip representation, so loading
restores them bit for bit.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..errors import EmptyTraining, FeatureMismatch, IoFailure

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1


class ModelKind(Enum):
    LR = "lr"
    DT = "dt"
    RF = "rf"
    SVR = "svr"


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature (mean, SD); constant features keep scale 1."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        sd = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(sd > 0, sd, 1.0))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Standardizer":
        return cls(np.asarray(data["mean"], dtype=float), np.asarray(data["scale"], dtype=float))


@dataclass(eq=False)
class TrainedModel:
    kind: ModelKind
    parameters: Any
    feature_names: Tuple[str, ...]
    standardizer: Optional[Standardizer] = None
    provenance: Dict[str, Any] = field(default_factory=dict)
    flags: Tuple[str, ...] = ()

    @property
    def n_features(self) -> int:
        return len(self.feature_names)


@dataclass(frozen=True)
class ModelCodec:
    predict: Callable[[TrainedModel, np.ndarray], np.ndarray]
    to_dict: Callable[[Any], Dict[str, Any]]
    from_dict: Callable[[Mapping[str, Any]], Any]


_CODECS: Dict[ModelKind, ModelCodec] = {}


def register_codec(kind: ModelKind, codec: ModelCodec) -> None:
    _CODECS[kind] = codec


def check_training(X: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyTraining("Training matrix holds no rows")
    if len(y) != len(X):
        raise FeatureMismatch(f"{len(X)} rows but {len(y)} targets")
    return X, y


def default_feature_names(n: int, names: Optional[Sequence[str]]) -> Tuple[str, ...]:
    if names is None:
        return tuple(f"x{i}" for i in range(n))
    if len(names) != n:
        raise FeatureMismatch(f"{len(names)} feature names for {n} columns")
    return tuple(names)


def predict(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Predictions for the rows of ``X`` (columns in training order)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise FeatureMismatch(f"Model expects {model.n_features} columns, got {X.shape[1]}",
                              expected=model.n_features, got=X.shape[1])
    return _CODECS[model.kind].predict(model, X)


def model_to_dict(model: TrainedModel) -> Dict[str, Any]:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind.value,
        "feature_names": list(model.feature_names),
        "standardizer": model.standardizer.to_dict() if model.standardizer else None,
        "provenance": model.provenance,
        "flags": list(model.flags),
        "parameters": _CODECS[model.kind].to_dict(model.parameters),
    }


def model_from_dict(data: Mapping[str, Any]) -> TrainedModel:
    kind = ModelKind(data["kind"])
    std = data.get("standardizer")
    return TrainedModel(
        kind=kind,
        parameters=_CODECS[kind].from_dict(data["parameters"]),
        feature_names=tuple(data["feature_names"]),
        standardizer=Standardizer.from_dict(std) if std else None,
        provenance=dict(data.get("provenance", {})),
        flags=tuple(data.get("flags", ())),
    )


def save_model(model: TrainedModel, path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(model_to_dict(model), sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"Cannot write {path}: {exc}", stage="regress", path=str(path)) from exc
    logger.info("Saved %s model to %s", model.kind.value, path)
    return path


def load_model(path: Path) -> TrainedModel:
    path = Path(path)
    if not path.exists():
        raise IoFailure(f"Model file not found: {path}", stage="regress", path=str(path))
    return model_from_dict(json.loads(path.read_text(encoding="utf-8")))
