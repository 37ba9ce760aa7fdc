"""Exact 1-D geometry on finite unions of closed intervals in [0, 1].

A `CompactSet` is the computable stand-in for a compact subset of the unit
interval: a sorted list of pairwise disjoint closed intervals with strict
gaps between them. Points are degenerate intervals. The empty set is the
`EMPTY_SET` sentinel, never a `CompactSet` without components.
"""

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Final

import numpy as np
import numpy.typing as npt

type RawInterval = tuple[float, float]
type FloatArray = npt.NDArray[np.float64]

AMBIENT_LEFT: Final = 0.0
AMBIENT_RIGHT: Final = 1.0
# Significant bits kept by dyadic_scales, so 2r and r/2 stay exact.
_DYADIC_MANTISSA_BITS = 8


class EmptySetError(ValueError):
    """Raised when an operation is undefined for the empty set."""


class InvalidIntervalError(ValueError):
    """Raised for intervals with a > b or endpoints outside [0, 1]."""


class InvalidScaleError(ValueError):
    """Raised for non-positive radii or badly ordered scale lists."""


@dataclass(frozen=True, slots=True)
class EmptySet:
    """The empty compact set."""

    def __len__(self) -> int:
        return 0

    @property
    def intervals(self) -> list[RawInterval]:
        return []


EMPTY_SET: Final = EmptySet()


@dataclass(frozen=True, slots=True, eq=False)
class CompactSet:
    """A nonempty normalized finite union of closed intervals.

    Build instances with `normalize` or `from_points`; the constructor does
    not re-check the normalization invariants.
    """

    lefts: FloatArray
    rights: FloatArray

    def __post_init__(self) -> None:
        self.lefts.setflags(write=False)
        self.rights.setflags(write=False)

    def __len__(self) -> int:
        return int(self.lefts.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CompactSet):
            return NotImplemented
        return bool(
            np.array_equal(self.lefts, other.lefts)
            and np.array_equal(self.rights, other.rights)
        )

    def __hash__(self) -> int:
        return hash((self.lefts.tobytes(), self.rights.tobytes()))

    @property
    def intervals(self) -> list[RawInterval]:
        return [
            (float(a), float(b))
            for a, b in zip(self.lefts, self.rights, strict=True)
        ]

    @property
    def diameter(self) -> float:
        return float(self.rights[-1] - self.lefts[0])

    @property
    def max_component_length(self) -> float:
        return float(np.max(self.rights - self.lefts))


type MaybeEmpty = CompactSet | EmptySet


def normalize(raw: Iterable[RawInterval]) -> MaybeEmpty:
    """Merge a list of closed intervals into a normalized compact set.

    Overlapping and touching intervals (gap exactly 0) are merged, since
    their union is a single closed interval.

    Args:
        raw: Closed intervals ``(a, b)`` with ``0 <= a <= b <= 1``.

    Returns:
        The normalized set, or `EMPTY_SET` for an empty input.

    Raises:
        InvalidIntervalError: If some interval has ``a > b`` or leaves
            the ambient interval.
    """
    pairs = np.asarray(list(raw), dtype=np.float64)
    if pairs.size == 0:
        return EMPTY_SET
    pairs = pairs.reshape(-1, 2)
    lefts, rights = pairs[:, 0], pairs[:, 1]
    if np.any(lefts > rights):
        msg = "every interval must satisfy a <= b"
        raise InvalidIntervalError(msg)
    if np.any(lefts < AMBIENT_LEFT) or np.any(rights > AMBIENT_RIGHT):
        msg = "intervals must lie within [0, 1]"
        raise InvalidIntervalError(msg)
    return _merge_sorted(*_sort_pairs(lefts, rights))


def from_points(points: Iterable[float]) -> MaybeEmpty:
    """Build the compact set of finitely many points."""
    values = np.asarray(list(points), dtype=np.float64)
    return normalize(np.stack([values, values], axis=-1))


def union(sets: Iterable[MaybeEmpty]) -> MaybeEmpty:
    """Union of compact sets."""
    parts = [s for s in sets if isinstance(s, CompactSet)]
    if not parts:
        return EMPTY_SET
    lefts = np.concatenate([s.lefts for s in parts])
    rights = np.concatenate([s.rights for s in parts])
    return _merge_sorted(*_sort_pairs(lefts, rights))


def is_subset(inner: MaybeEmpty, outer: MaybeEmpty) -> bool:
    """Return True if every point of ``inner`` lies in ``outer``."""
    if isinstance(inner, EmptySet):
        return True
    if isinstance(outer, EmptySet):
        return False
    idx = np.searchsorted(outer.lefts, inner.lefts, side="right") - 1
    if np.any(idx < 0):
        return False
    return bool(np.all(inner.rights <= outer.rights[idx]))


def _sort_pairs(
    lefts: FloatArray, rights: FloatArray
) -> tuple[FloatArray, FloatArray]:
    order = np.lexsort((rights, lefts))
    return lefts[order], rights[order]


def _merge_sorted(lefts: FloatArray, rights: FloatArray) -> CompactSet:
    reach = np.maximum.accumulate(rights)
    starts = np.ones(lefts.size, dtype=bool)
    starts[1:] = lefts[1:] > reach[:-1]
    start_idx = np.flatnonzero(starts)
    end_idx = np.append(start_idx[1:] - 1, lefts.size - 1)
    return CompactSet(
        lefts=np.ascontiguousarray(lefts[start_idx]),
        rights=np.ascontiguousarray(reach[end_idx]),
    )


def distance_to_set(xs: FloatArray, target: CompactSet) -> FloatArray:
    """Distance from each of ``xs`` to the nearest point of ``target``."""
    xs = np.asarray(xs, dtype=np.float64)
    n = len(target)
    idx = np.searchsorted(target.lefts, xs, side="right") - 1
    below = np.clip(idx, 0, n - 1)
    left_gap = np.where(
        idx >= 0, np.maximum(xs - target.rights[below], 0.0), np.inf
    )
    above = np.clip(idx + 1, 0, n - 1)
    right_gap = np.where(idx + 1 < n, target.lefts[above] - xs, np.inf)
    return np.minimum(left_gap, right_gap)


def _directed_hausdorff(source: CompactSet, target: CompactSet) -> float:
    # sup of dist(., target) over an interval of source sits at one of its
    # endpoints or at the midpoint of a gap of target lying inside it
    candidates = [source.lefts, source.rights]
    if len(target) > 1:
        midpoints = (target.rights[:-1] + target.lefts[1:]) / 2.0
        idx = np.searchsorted(source.lefts, midpoints, side="right") - 1
        inside = idx >= 0
        inside[inside] = midpoints[inside] <= source.rights[idx[inside]]
        candidates.append(midpoints[inside])
    return float(np.max(distance_to_set(np.concatenate(candidates), target)))


def hausdorff_distance(a: MaybeEmpty, b: MaybeEmpty) -> float:
    """Exact Hausdorff distance between two nonempty compact sets.

    Raises:
        EmptySetError: If either set is empty.
    """
    if isinstance(a, EmptySet) or isinstance(b, EmptySet):
        msg = "Hausdorff distance is undefined for empty set"
        raise EmptySetError(msg)
    return max(_directed_hausdorff(a, b), _directed_hausdorff(b, a))


def _check_radius(r: float) -> None:
    if not r > 0 or not math.isfinite(r):
        msg = f"radius must be a positive finite number, got {r!r}"
        raise InvalidScaleError(msg)


def _balls_to_reach(start: float, bound: float, width: float) -> int:
    """Smallest k >= 1 with start + k * width >= bound."""
    k = max(1, math.ceil((bound - start) / width))
    while start + k * width < bound:
        k += 1
    while k > 1 and start + (k - 1) * width >= bound:
        k -= 1
    return k


def _steps_strictly_below(base: float, bound: float, width: float) -> int:
    """Number of j >= 1 with base + j * width < bound."""
    if base + width >= bound:
        return 0
    k = max(1, math.ceil((bound - base) / width) - 1)
    while base + (k + 1) * width < bound:
        k += 1
    while k > 0 and base + k * width >= bound:
        k -= 1
    return k


def covering_number(k_set: MaybeEmpty, r: float) -> int:
    """Minimal number of closed balls of radius r covering the set.

    Greedy left-to-right sweep: every ball starts at the leftmost point not
    yet covered. This is optimal on the line.

    Args:
        k_set: The compact set.
        r: Ball radius; a ball is a closed interval of length 2r.

    Returns:
        N_r of the set, 0 for the empty set.
    """
    _check_radius(r)
    if isinstance(k_set, EmptySet):
        return 0
    width = 2.0 * r
    lefts, rights = k_set.lefts, k_set.rights
    n = len(k_set)
    count = 0
    i = 0
    start = float(lefts[0])
    while i < n:
        balls = _balls_to_reach(start, float(rights[i]), width)
        count += balls
        end = start + balls * width
        i = int(np.searchsorted(rights, end, side="right"))
        if i < n:
            start = max(float(lefts[i]), end)
    return count


def packing_number(k_set: MaybeEmpty, r: float) -> int:
    """Maximal number of pairwise disjoint closed r-balls centered in the set.

    Closed balls are disjoint only when their centers are more than 2r
    apart. Centers are chosen greedily from the left; a center forced past
    ``c + 2r`` sits infinitesimally to the right of it, so the result is the
    supremum over admissible placements.

    Returns:
        P_r of the set, 0 for the empty set.
    """
    _check_radius(r)
    if isinstance(k_set, EmptySet):
        return 0
    width = 2.0 * r
    count = 0
    last: float | None = None
    for a, b in zip(k_set.lefts.tolist(), k_set.rights.tolist(), strict=True):
        if last is None or a > last + width:
            extra = _steps_strictly_below(a, b, width)
            count += 1 + extra
            last = a + extra * width
        else:
            extra = _steps_strictly_below(last, b, width)
            if extra:
                count += extra
                last = last + extra * width
    return count


@dataclass(frozen=True, slots=True)
class CountRow:
    r: float
    covering: int
    packing: int


def check_scales(scales: Sequence[float]) -> None:
    for r in scales:
        _check_radius(r)
    if any(b >= a for a, b in zip(scales, scales[1:], strict=False)):
        msg = "scales must be strictly decreasing"
        raise InvalidScaleError(msg)


def count_table(k_set: MaybeEmpty, scales: Sequence[float]) -> list[CountRow]:
    """Covering and packing numbers of the set at each scale.

    Args:
        k_set: The compact set.
        scales: Strictly decreasing positive radii.

    Returns:
        One row per scale, in the given order.
    """
    check_scales(scales)
    return [
        CountRow(
            r=r,
            covering=covering_number(k_set, r),
            packing=packing_number(k_set, r),
        )
        for r in scales
    ]


def _dyadic_round(x: float) -> float:
    mantissa, exponent = math.frexp(x)
    scale = 1 << _DYADIC_MANTISSA_BITS
    return math.ldexp(round(mantissa * scale) / scale, exponent)


def dyadic_scales(
    r_max: float, r_min: float, points_per_decade: int
) -> list[float]:
    """Log-spaced radii from r_max down to r_min with short binary mantissas.

    Every radius is rounded to an 8-bit mantissa, so doubling and halving
    are exact and ties against 2r are reproducible.
    """
    _check_radius(r_max)
    _check_radius(r_min)
    if r_min >= r_max:
        msg = "r_min must be smaller than r_max"
        raise InvalidScaleError(msg)
    steps = math.floor(math.log10(r_max / r_min) * points_per_decade + 1e-9)
    scales: list[float] = []
    for i in range(steps + 1):
        r = _dyadic_round(r_max * 10.0 ** (-i / points_per_decade))
        if r_min <= r <= r_max and (not scales or r < scales[-1]):
            scales.append(r)
    return scales
