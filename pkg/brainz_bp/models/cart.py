"""
Regression trees grown breadth first.

All nodes of one depth are split together: for every feature the active rows
are kept sorted by (node, value), so candidate splits of every node come out
of one cumulative-sum pass. A node takes the split with the least summed
squared error of its two children; ties go to the lowest feature index, then
to the lowest threshold. Thresholds are midpoints between consecutive distinct
values and rows with ``x <= threshold`` go left.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence

import numpy as np

from ..errors import FeatureMismatch
from .base import ModelCodec, ModelKind, TrainedModel, check_training, default_feature_names, register_codec

logger = logging.getLogger(__name__)

LEAF = -1


@dataclass(frozen=True)
class TreeConfig:
    min_samples_leaf: int = 1
    max_depth: Optional[int] = None
    mtry: Optional[int] = None  # features drawn per node; None means all


@dataclass(frozen=True, eq=False)
class TreeArrays:
    """Flat node arrays; node 0 is the root and ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity_decrease: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        node = np.zeros(len(X), dtype=np.intp)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            current = node[rows]
            go_left = X[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])
            active[rows] = self.feature[node[rows]] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(np.asarray(X, dtype=float))]

    def feature_importances(self, n_features: int) -> np.ndarray:
        """Per-feature weighted impurity decrease: sum over splits of (SSE_parent - SSE_children) / n_root."""
        internal = self.feature != LEAF
        raw = np.bincount(self.feature[internal], weights=self.impurity_decrease[internal], minlength=n_features)
        return raw / max(int(self.n_samples[0]), 1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "feature": self.feature.tolist(),
            "threshold": [None if np.isnan(t) else float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
            "impurity_decrease": self.impurity_decrease.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TreeArrays":
        return cls(
            feature=np.asarray(data["feature"], dtype=np.intp),
            threshold=np.asarray([np.nan if t is None else t for t in data["threshold"]], dtype=float),
            left=np.asarray(data["left"], dtype=np.intp),
            right=np.asarray(data["right"], dtype=np.intp),
            value=np.asarray(data["value"], dtype=float),
            n_samples=np.asarray(data["n_samples"], dtype=np.intp),
            impurity_decrease=np.asarray(data["impurity_decrease"], dtype=float),
        )


def grow_tree(X: np.ndarray, y: np.ndarray, config: TreeConfig = TreeConfig(),
              rng: Optional[np.random.Generator] = None) -> TreeArrays:
    X, y = check_training(X, y)
    n, p = X.shape
    mtry = p if config.mtry is None else int(config.mtry)
    if not 1 <= mtry <= p:
        raise FeatureMismatch(f"mtry={mtry} outside [1, {p}]")
    if mtry < p and rng is None:
        rng = np.random.default_rng(0)
    leaf_min = max(1, int(config.min_samples_leaf))
    max_depth = config.max_depth if config.max_depth is not None else np.inf

    feature, threshold, left, right = [LEAF], [np.nan], [LEAF], [LEAF]
    value, counts_out, decrease = [0.0], [n], [0.0]

    node_of = np.zeros(n, dtype=np.intp)
    orders = [np.argsort(X[:, f], kind="stable") for f in range(p)]
    frontier = np.array([0], dtype=np.intp)
    depth = 0
    yc = np.zeros(n)

    while frontier.size:
        n_front = len(frontier)
        slot = np.full(len(feature), -1, dtype=np.intp)
        slot[frontier] = np.arange(n_front)

        rows = orders[0]
        row_slot = slot[node_of[rows]]
        counts = np.bincount(row_slot, minlength=n_front)
        means = np.bincount(row_slot, weights=y[rows], minlength=n_front) / counts
        for k, node in enumerate(frontier):
            value[node] = float(means[k])
            counts_out[node] = int(counts[k])
        yc[rows] = y[rows] - means[row_slot]
        sse_parent = np.bincount(row_slot, weights=yc[rows] ** 2, minlength=n_front)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        pure = np.minimum.reduceat(y[rows], starts) == np.maximum.reduceat(y[rows], starts)
        splittable = (counts >= 2 * leaf_min) & ~pure & (depth < max_depth)

        if mtry < p:
            keys = rng.random((n_front, p))
            allowed = keys.argsort(axis=1).argsort(axis=1) < mtry
        else:
            allowed = np.ones((n_front, p), dtype=bool)

        feat_sse = np.full((p, n_front), np.inf)
        feat_thr = np.full((p, n_front), np.nan)
        if splittable.any():
            for f in range(p):
                o = orders[f]
                xs = X[o, f]
                ys = yc[o]
                sl = slot[node_of[o]]
                cs = np.cumsum(ys)
                cs2 = np.cumsum(ys * ys)
                seg_start = starts[sl]
                seg_last = seg_start + counts[sl] - 1
                base = np.where(seg_start > 0, cs[seg_start - 1], 0.0)
                base2 = np.where(seg_start > 0, cs2[seg_start - 1], 0.0)
                n_left = np.arange(len(o)) - seg_start + 1
                n_right = counts[sl] - n_left
                s_left, s2_left = cs - base, cs2 - base2
                s_right, s2_right = cs[seg_last] - base - s_left, cs2[seg_last] - base2 - s2_left
                distinct = np.append(xs[:-1] < xs[1:], False)
                valid = ((n_left >= leaf_min) & (n_right >= leaf_min) & distinct
                         & splittable[sl] & allowed[sl, f])
                with np.errstate(divide="ignore", invalid="ignore"):
                    sse = (s2_left - s_left ** 2 / n_left) + (s2_right - s_right ** 2 / n_right)
                sse = np.where(valid, sse, np.inf)
                seg_min = np.minimum.reduceat(sse, starts)
                hits = np.flatnonzero(np.isfinite(sse) & (sse == seg_min[sl]))
                if len(hits) == 0:
                    continue
                hit_slots, first = np.unique(sl[hits], return_index=True)
                pos = hits[first]
                lo, hi = xs[pos], xs[pos + 1]
                mid = 0.5 * (lo + hi)
                feat_sse[f, hit_slots] = seg_min[hit_slots]
                feat_thr[f, hit_slots] = np.where(mid < hi, mid, lo)

        best = feat_sse.min(axis=0)
        tol = 1e-9 * np.maximum(sse_parent, 1.0)
        chosen = np.argmax(feat_sse <= best + tol, axis=0)
        split = np.isfinite(best)

        children = []
        go_to = np.full(n_front, -1, dtype=np.intp)
        for k in np.flatnonzero(split):
            node = frontier[k]
            f = int(chosen[k])
            left_id, right_id = len(feature), len(feature) + 1
            feature[node], threshold[node] = f, float(feat_thr[f, k])
            left[node], right[node] = left_id, right_id
            decrease[node] = max(0.0, float(sse_parent[k] - feat_sse[f, k]))
            for _ in range(2):
                feature.append(LEAF)
                threshold.append(np.nan)
                left.append(LEAF)
                right.append(LEAF)
                value.append(0.0)
                counts_out.append(0)
                decrease.append(0.0)
            children.extend([left_id, right_id])
            go_to[k] = left_id

        moving = rows[split[row_slot]]
        if len(moving):
            k_rows = slot[node_of[moving]]
            f_rows = chosen[k_rows]
            thr_rows = np.asarray(threshold)[frontier[k_rows]]
            node_of[moving] = go_to[k_rows] + (X[moving, f_rows] > thr_rows)
        keep = np.zeros(n, dtype=bool)
        keep[moving] = True
        for f in range(p):
            o = orders[f][keep[orders[f]]]
            orders[f] = o[np.argsort(node_of[o], kind="stable")]
        frontier = np.asarray(children, dtype=np.intp)
        depth += 1

    return TreeArrays(
        feature=np.asarray(feature, dtype=np.intp),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.intp),
        right=np.asarray(right, dtype=np.intp),
        value=np.asarray(value, dtype=float),
        n_samples=np.asarray(counts_out, dtype=np.intp),
        impurity_decrease=np.asarray(decrease, dtype=float),
    )


def train_cart(X: np.ndarray, y: np.ndarray, config: TreeConfig = TreeConfig(),
               feature_names: Optional[Sequence[str]] = None) -> TrainedModel:
    X, y = check_training(X, y)
    tree = grow_tree(X, y, config)
    provenance = {"min_samples_leaf": config.min_samples_leaf, "max_depth": config.max_depth, "n_rows": len(X)}
    logger.debug("Grew tree with %d nodes", tree.n_nodes)
    return TrainedModel(ModelKind.DT, tree, default_feature_names(X.shape[1], feature_names), None, provenance)


def _predict(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    return model.parameters.predict(X)


register_codec(ModelKind.DT, ModelCodec(_predict, TreeArrays.to_dict, TreeArrays.from_dict))
