"""
Approximate and sample entropy with Chebyshev template distance.

Template matches are counted in row blocks of the pairwise comparison matrix,
so memory stays bounded for long segments and counts are exact integers.
"""

from typing import Tuple

import numpy as np

from ..errors import UndefinedEntropy
from .base import FeatureGroup

ENTROPY_NAMES = ("ApEn", "SampEn")
MIN_LENGTH = 100

_ROW_BLOCK = 512


def match_counts(x: np.ndarray, m: int, r: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-template match counts (self-matches included).

    Returns counts for the N-m+1 templates of length m, for the N-m templates
    of length m+1, and for the first N-m templates of length m compared with
    each other only.
    """
    n = len(x)
    n_m = n - m + 1
    n_m1 = n - m
    counts_m = np.zeros(n_m, dtype=np.int64)
    counts_m1 = np.zeros(n_m1, dtype=np.int64)
    inner_m = np.zeros(n_m1, dtype=np.int64)
    for a in range(0, n_m, _ROW_BLOCK):
        b = min(a + _ROW_BLOCK, n_m)
        match = np.ones((b - a, n_m), dtype=bool)
        for k in range(m):
            match &= np.abs(x[a + k:b + k, None] - x[None, k:k + n_m]) <= r
        counts_m[a:b] = match.sum(axis=1)
        rows = min(b, n_m1) - a
        if rows > 0:
            longer = match[:rows, :n_m1] & (np.abs(x[a + m:a + m + rows, None] - x[None, m:m + n_m1]) <= r)
            inner_m[a:a + rows] = match[:rows, :n_m1].sum(axis=1)
            counts_m1[a:a + rows] = longer.sum(axis=1)
    return counts_m, counts_m1, inner_m


def _entropies(x: np.ndarray, m: int, r: float) -> Tuple[float, float]:
    counts_m, counts_m1, inner_m = match_counts(x, m, r)
    apen = float(np.mean(np.log(counts_m / len(counts_m))) - np.mean(np.log(counts_m1 / len(counts_m1))))
    n_templates = len(counts_m1)
    b = int(inner_m.sum()) - n_templates
    a = int(counts_m1.sum()) - n_templates
    sampen = float("nan") if a == 0 or b == 0 else float(-np.log(a / b))
    return apen, sampen


def approximate_entropy(x: np.ndarray, m: int, r: float) -> float:
    """Phi^m - Phi^(m+1) with self-matches included."""
    return _entropies(np.asarray(x, dtype=float), m, r)[0]


def sample_entropy(x: np.ndarray, m: int, r: float) -> float:
    """-ln(A/B) over the N-m templates, self-matches excluded; NaN when A or B is 0."""
    return _entropies(np.asarray(x, dtype=float), m, r)[1]


def entropy_features(values: np.ndarray, m: int = 2, r_frac: float = 0.2) -> FeatureGroup:
    """ApEn and SampEn with tolerance ``r_frac`` times the sample SD of the segment."""
    x = np.asarray(values, dtype=float)
    reason = UndefinedEntropy.__name__
    if len(x) < max(MIN_LENGTH, m + 2):
        nan = float("nan")
        return FeatureGroup({"ApEn": nan, "SampEn": nan}, {"ApEn": reason, "SampEn": reason})
    apen, sampen = _entropies(x, m, r_frac * float(np.std(x, ddof=1)))
    flags = {} if np.isfinite(sampen) else {"SampEn": reason}
    return FeatureGroup({"ApEn": apen, "SampEn": sampen}, flags)
