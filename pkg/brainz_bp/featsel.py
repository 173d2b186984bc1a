"""
Feature ranking and top-K selection.

Three rankings are offered: absolute Pearson correlation with the target,
random-forest impurity importance, and the average of those two rank lists.
Ties always go to the feature that comes first in canonical order.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .dataset_io import FeatureTable
from .errors import DegenerateTarget, KOutOfRange, MismatchedTargets, TooFewRows
from .evaluation import CvConfig, cross_validate
from .models import ForestConfig, ModelKind, ModelSettings, fit_forest

logger = logging.getLogger(__name__)

ZERO_VARIANCE_FEATURE = "ZeroVarianceFeature"


class RankMethod(Enum):
    PCC = "pcc"
    RF_IMPURITY = "rf_impurity"
    COMBINED = "combined"


@dataclass(frozen=True, eq=False)
class RankedFeatureSet:
    """``ranks[i]`` is the 0-based position of feature ``i``; ``order`` lists features best first."""

    method: RankMethod
    scores: np.ndarray
    ranks: np.ndarray
    target: str
    k_selected: int
    seed: Optional[int]
    feature_names: Tuple[str, ...]
    flags: Tuple[str, ...] = ()

    @property
    def order(self) -> np.ndarray:
        return np.argsort(self.ranks, kind="stable")

    def top(self, k: int) -> Tuple[str, ...]:
        return tuple(self.feature_names[i] for i in self.order[:k])


def _ranks_from_keys(keys: np.ndarray) -> np.ndarray:
    """Rank ascending by ``keys``, lower index first on ties."""
    order = np.lexsort((np.arange(len(keys)), keys))
    ranks = np.empty(len(keys), dtype=int)
    ranks[order] = np.arange(len(keys))
    return ranks


def _xy(table: FeatureTable, target: str) -> Tuple[np.ndarray, np.ndarray]:
    valid = table.valid_rows()
    return valid.features, valid.target(target)


def pcc_scores(table: FeatureTable, target: str = "sbp") -> Tuple[np.ndarray, Tuple[str, ...]]:
    """Signed Pearson r of every feature with the target; zero-variance columns score 0."""
    X, y = _xy(table, target)
    if len(y) < 2:
        raise TooFewRows(f"PCC needs at least 2 rows, got {len(y)}", stage="featsel")
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    denom = np.sqrt((xc ** 2).sum(axis=0) * (yc ** 2).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(denom > 0, (xc * yc[:, None]).sum(axis=0) / denom, 0.0)
    flags = (ZERO_VARIANCE_FEATURE,) if np.any(denom == 0) else ()
    if flags:
        zero = [table.feature_names[i] for i in np.flatnonzero(denom == 0)]
        logger.warning("Zero-variance features score 0: %s", ", ".join(zero))
    return r, flags


def impurity_scores(table: FeatureTable, target: str = "sbp", forest_config: ForestConfig = ForestConfig(),
                    seed: Optional[int] = None, threads: int = 1) -> np.ndarray:
    """Forest impurity importances, normalized to sum 1."""
    X, y = _xy(table, target)
    if len(y) == 0 or np.ptp(y) == 0:
        raise DegenerateTarget(f"Target {target} is constant", stage="featsel", target=target)
    config = forest_config if seed is None else replace(forest_config, seed=seed)
    return fit_forest(X, y, config, threads).feature_importances()


def rank_features(table: FeatureTable, method: RankMethod = RankMethod.RF_IMPURITY, target: str = "sbp",
                  forest_config: ForestConfig = ForestConfig(), seed: Optional[int] = None,
                  k_selected: int = 0, threads: int = 1) -> RankedFeatureSet:
    method = RankMethod(method)
    names = tuple(table.feature_names)
    if method is RankMethod.PCC:
        scores, flags = pcc_scores(table, target)
        ranks = _ranks_from_keys(-np.abs(scores))
        return RankedFeatureSet(method, scores, ranks, target, k_selected, None, names, flags)
    if method is RankMethod.RF_IMPURITY:
        seed = forest_config.seed if seed is None else seed
        scores = impurity_scores(table, target, forest_config, seed, threads)
        return RankedFeatureSet(method, scores, _ranks_from_keys(-scores), target, k_selected, seed, names)
    pcc = rank_features(table, RankMethod.PCC, target, forest_config, seed, k_selected, threads)
    imp = rank_features(table, RankMethod.RF_IMPURITY, target, forest_config, seed, k_selected, threads)
    return replace(combined_ranking(pcc, imp), k_selected=k_selected)


def combined_ranking(pcc: RankedFeatureSet, imp: RankedFeatureSet) -> RankedFeatureSet:
    """Average of two rank lists; the lower average rank comes first."""
    if pcc.target != imp.target:
        raise MismatchedTargets(f"Cannot combine {pcc.target} and {imp.target} rankings", stage="featsel")
    if pcc.feature_names != imp.feature_names:
        raise MismatchedTargets("Rankings cover different features", stage="featsel")
    scores = (pcc.ranks + imp.ranks) / 2.0
    return RankedFeatureSet(RankMethod.COMBINED, scores, _ranks_from_keys(scores), pcc.target,
                            max(pcc.k_selected, imp.k_selected), imp.seed, pcc.feature_names,
                            tuple(dict.fromkeys(pcc.flags + imp.flags)))


def select_top_k(table: FeatureTable, ranking: RankedFeatureSet, k: int) -> FeatureTable:
    """Project onto the ``k`` best features, keeping canonical column order."""
    if not 1 <= k <= len(ranking.feature_names):
        raise KOutOfRange(f"k={k} outside [1, {len(ranking.feature_names)}]", stage="featsel", k=k)
    chosen = ranking.top(k)
    logger.info("Selected top %d features by %s for %s", k, ranking.method.value, ranking.target)
    return table.project(chosen, {"featsel_method": ranking.method.value, "featsel_k": k,
                                  "featsel_target": ranking.target, "featsel_seed": ranking.seed})


def _sweep_point(table: FeatureTable, ranking: RankedFeatureSet, k: int, settings: ModelSettings,
                 cv: CvConfig) -> Dict[str, Any]:
    report = cross_validate(select_top_k(table, ranking, k), settings.with_kind(ModelKind.RF), cv, threads=1)
    return {"k": k, "target": cv.target, "mae": report.metrics.mae, "rmse": report.metrics.rmse,
            "r": report.metrics.r}


def sweep_top_k(table: FeatureTable, method: RankMethod, k_grid: Sequence[int], settings: ModelSettings,
                cv: CvConfig, threads: int = 1) -> pd.DataFrame:
    """Cross-validated random-forest error for every k of ``k_grid``, ranking computed once."""
    n_features = len(table.feature_names)
    bad = [k for k in k_grid if not 1 <= k <= n_features]
    if bad or not k_grid:
        raise KOutOfRange(f"k grid {list(k_grid)} must be non-empty within [1, {n_features}]", stage="featsel")
    ranking = rank_features(table, method, cv.target, settings.forest, threads=threads)
    point_settings = replace(settings, threads=1)
    rows = Parallel(n_jobs=threads)(
        delayed(_sweep_point)(table, ranking, int(k), point_settings, cv) for k in sorted(set(k_grid), reverse=True)
    )
    return pd.DataFrame(rows)


def ranking_to_frame(ranking: RankedFeatureSet) -> pd.DataFrame:
    order = ranking.order
    return pd.DataFrame({
        "feature": [ranking.feature_names[i] for i in order],
        "score": ranking.scores[order],
        "rank": ranking.ranks[order],
    })
