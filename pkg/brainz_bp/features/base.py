"""Shared types for the feature groups."""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from ..errors import NoValidCycles
from ..fiducial import NO_NEXT_MINIMUM, CycleFiducials


@dataclass(frozen=True)
class FeatureGroup:
    """Ordered feature values of one group, per-feature reason flags and excluded cycle count."""

    values: Dict[str, float]
    flags: Dict[str, str] = field(default_factory=dict)
    n_excluded: int = 0

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(self.values)

    def as_tuple(self) -> Tuple[float, ...]:
        return tuple(self.values.values())


def usable_cycles(cycles: Iterable[CycleFiducials], needs_next: bool) -> Tuple[List[CycleFiducials], int]:
    """Cycles whose flags allow use, plus the count excluded.

    A missing next minimum only matters to features that use it.
    """
    cycles = list(cycles)
    tolerated = set() if needs_next else {NO_NEXT_MINIMUM}
    kept = [c for c in cycles if set(c.flags) <= tolerated]
    return kept, len(cycles) - len(kept)


def require_cycles(cycles: Sequence[CycleFiducials], group: str) -> None:
    if not cycles:
        raise NoValidCycles(f"No valid cycles for {group} features")


def mean_per_feature(names: Sequence[str], per_cycle: Sequence[Mapping[str, float]],
                     reasons: Mapping[str, str], n_excluded: int) -> FeatureGroup:
    """Average per-cycle values; a feature no cycle could provide becomes NaN with its reason."""
    values: Dict[str, float] = {}
    flags: Dict[str, str] = {}
    for name in names:
        column = [row[name] for row in per_cycle if name in row and np.isfinite(row[name])]
        if column:
            values[name] = float(np.mean(column))
        else:
            values[name] = float("nan")
            flags[name] = reasons.get(name, NoValidCycles.__name__)
    return FeatureGroup(values, flags, n_excluded)


def time_to_position(t: float, t0: float, fs: float) -> float:
    return (t - t0) * fs
