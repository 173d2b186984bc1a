"""
Bootstrap-aggregated regression forest.

Every tree gets its own generator spawned from the forest seed, so the fitted
forest does not depend on how many workers grew it.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from ..errors import FeatureMismatch
from .base import ModelCodec, ModelKind, TrainedModel, check_training, default_feature_names, register_codec
from .cart import TreeArrays, TreeConfig, grow_tree

logger = logging.getLogger(__name__)

DEPLOYED_N_FEATURES = 10


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    min_samples_leaf: int = 1
    max_depth: Optional[int] = None
    mtry: Optional[int] = None
    bootstrap: bool = True
    seed: int = 0

    def resolve_mtry(self, n_features: int) -> int:
        """All features for the deployed 10-feature set, ceil(p/3) otherwise."""
        if self.mtry is not None:
            mtry = int(self.mtry)
        elif n_features == DEPLOYED_N_FEATURES:
            mtry = n_features
        else:
            mtry = max(1, math.ceil(n_features / 3))
        if not 1 <= mtry <= n_features:
            raise FeatureMismatch(f"mtry={mtry} outside [1, {n_features}]", mtry=mtry, n_features=n_features)
        return mtry


@dataclass(eq=False)
class ForestModel:
    trees: Tuple[TreeArrays, ...]
    oob_indices: Tuple[np.ndarray, ...]
    n_features: int
    training_X: Optional[np.ndarray] = None
    training_y: Optional[np.ndarray] = None

    def tree_predictions(self, X: np.ndarray) -> np.ndarray:
        """(n_trees, n_rows) matrix of individual tree outputs."""
        X = np.asarray(X, dtype=float)
        return np.vstack([tree.predict(X) for tree in self.trees])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.tree_predictions(X).mean(axis=0)

    def oob_error(self) -> float:
        """MSE of each training row predicted by the trees that did not draw it."""
        if self.training_X is None or self.training_y is None:
            return float("nan")
        n = len(self.training_y)
        sums = np.zeros(n)
        counts = np.zeros(n)
        for tree, oob in zip(self.trees, self.oob_indices):
            if len(oob):
                sums[oob] += tree.predict(self.training_X[oob])
                counts[oob] += 1
        seen = counts > 0
        if not seen.any():
            return float("nan")
        return float(np.mean((sums[seen] / counts[seen] - self.training_y[seen]) ** 2))

    def tree_oob_errors(self) -> np.ndarray:
        """Out-of-bag MSE of every tree on its own held-out rows."""
        errors = np.full(len(self.trees), np.nan)
        if self.training_X is None or self.training_y is None:
            return errors
        for i, (tree, oob) in enumerate(zip(self.trees, self.oob_indices)):
            if len(oob):
                errors[i] = np.mean((tree.predict(self.training_X[oob]) - self.training_y[oob]) ** 2)
        return errors

    def feature_importances(self) -> np.ndarray:
        """Impurity decrease averaged over trees, normalized to sum 1."""
        per_tree = np.vstack([tree.feature_importances(self.n_features) for tree in self.trees])
        mean = per_tree.mean(axis=0)
        total = mean.sum()
        return mean / total if total > 0 else np.zeros(self.n_features)

    def to_dict(self) -> Dict[str, Any]:
        """Trees only; out-of-bag rows need the training data, which is not saved."""
        return {
            "n_features": self.n_features,
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ForestModel":
        return cls(
            trees=tuple(TreeArrays.from_dict(t) for t in data["trees"]),
            oob_indices=tuple(np.empty(0, dtype=np.intp) for _ in data["trees"]),
            n_features=int(data["n_features"]),
        )


def _grow_one(X: np.ndarray, y: np.ndarray, tree_config: TreeConfig, bootstrap: bool,
              seed_seq: np.random.SeedSequence) -> Tuple[TreeArrays, np.ndarray]:
    rng = np.random.default_rng(seed_seq)
    n = len(y)
    if bootstrap:
        drawn = rng.integers(0, n, n)
        oob = np.flatnonzero(np.bincount(drawn, minlength=n) == 0)
        return grow_tree(X[drawn], y[drawn], tree_config, rng), oob
    return grow_tree(X, y, tree_config, rng), np.empty(0, dtype=np.intp)


def fit_forest(X: np.ndarray, y: np.ndarray, config: ForestConfig = ForestConfig(), threads: int = 1) -> ForestModel:
    X, y = check_training(X, y)
    if config.n_trees < 1:
        raise FeatureMismatch(f"n_trees must be >= 1, got {config.n_trees}")
    mtry = config.resolve_mtry(X.shape[1])
    tree_config = TreeConfig(config.min_samples_leaf, config.max_depth, mtry)
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    grown = Parallel(n_jobs=threads)(
        delayed(_grow_one)(X, y, tree_config, config.bootstrap, s) for s in seeds
    )
    trees, oob = zip(*grown)
    return ForestModel(tuple(trees), tuple(oob), X.shape[1], X, y)


def train_rf(X: np.ndarray, y: np.ndarray, config: ForestConfig = ForestConfig(),
             feature_names: Optional[Sequence[str]] = None, threads: int = 1) -> TrainedModel:
    X, y = check_training(X, y)
    forest = fit_forest(X, y, config, threads)
    mtry = config.resolve_mtry(X.shape[1])
    provenance = {
        "n_trees": config.n_trees,
        "min_samples_leaf": config.min_samples_leaf,
        "max_depth": config.max_depth,
        "mtry": mtry,
        "bootstrap": config.bootstrap,
        "seed": config.seed,
        "n_rows": len(X),
    }
    logger.info("Trained random forest: %d trees, mtry=%d, %d rows", config.n_trees, mtry, len(X))
    return TrainedModel(ModelKind.RF, forest, default_feature_names(X.shape[1], feature_names), None, provenance)


def _predict(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    return model.parameters.predict(X)


register_codec(ModelKind.RF, ModelCodec(_predict, ForestModel.to_dict, ForestModel.from_dict))
