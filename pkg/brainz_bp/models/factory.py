"""Builds any of the four regressors from the ``model`` config section."""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .base import ModelKind, TrainedModel
from .cart import TreeConfig, train_cart
from .forest import ForestConfig, train_rf
from .linear import train_lr
from .svr import SvrConfig, train_svr

logger = logging.getLogger(__name__)


def _optional(value: Any) -> Optional[Any]:
    """Config uses 0 for "resolve automatically"."""
    return None if not value else value


@dataclass(frozen=True)
class ModelSettings:
    kind: ModelKind = ModelKind.RF
    forest: ForestConfig = field(default_factory=ForestConfig)
    tree: TreeConfig = field(default_factory=TreeConfig)
    svr: SvrConfig = field(default_factory=SvrConfig)
    threads: int = 1

    @classmethod
    def from_sections(cls, sections: Mapping[str, Mapping[str, Any]], threads: int = 1) -> "ModelSettings":
        model = sections["model"]
        seed = int(sections["runtime"]["seed"])
        max_depth = _optional(model["max_depth"])
        return cls(
            kind=ModelKind(model["kind"]),
            forest=ForestConfig(
                n_trees=int(model["n_trees"]),
                min_samples_leaf=int(model["min_samples_leaf"]),
                max_depth=max_depth,
                mtry=_optional(model["mtry"]),
                bootstrap=bool(model["bootstrap"]),
                seed=seed,
            ),
            tree=TreeConfig(min_samples_leaf=int(model["min_samples_leaf"]), max_depth=max_depth),
            svr=SvrConfig(
                c=float(model["svr_c"]),
                epsilon=float(model["svr_epsilon"]),
                gamma=_optional(float(model["svr_gamma"])),
                tol=float(model["svr_tol"]),
                max_passes=int(model["svr_max_passes"]),
            ),
            threads=threads,
        )

    def with_kind(self, kind: ModelKind) -> "ModelSettings":
        return replace(self, kind=kind)

    def with_seed(self, seed: int) -> "ModelSettings":
        return replace(self, forest=replace(self.forest, seed=seed))

    def with_trees(self, n_trees: int) -> "ModelSettings":
        return replace(self, forest=replace(self.forest, n_trees=n_trees))


def train_model(X: np.ndarray, y: np.ndarray, settings: ModelSettings = ModelSettings(),
                feature_names: Optional[Sequence[str]] = None) -> TrainedModel:
    """Train the regressor named by ``settings.kind``."""
    logger.debug("Training %s on %s", settings.kind.value, np.shape(X))
    if settings.kind is ModelKind.LR:
        return train_lr(X, y, feature_names)
    if settings.kind is ModelKind.DT:
        return train_cart(X, y, settings.tree, feature_names)
    if settings.kind is ModelKind.RF:
        return train_rf(X, y, settings.forest, feature_names, settings.threads)
    return train_svr(X, y, settings.svr, feature_names)
