"""Built-in construction models.

``cantor`` and ``homogeneous_random`` branch finitely. ``example1`` and
``example2`` branch infinitely: the n-th child of a cell has its right end
at 1/n^p of the cell and ratio V_n, a sequence dominated by C * q^n.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum
from functools import lru_cache
from typing import TYPE_CHECKING, Final

import numpy as np
import structlog
from scipy import optimize, stats

from random_fractals import geometry
from random_fractals.construction import (
    Cutoff,
    ModelFlags,
    ModelSpec,
    NodeContext,
    Offspring,
    OffspringBatch,
    SimilarityMap,
)

if TYPE_CHECKING:
    from random_fractals.config import ModelConfig

logger = structlog.get_logger()

# Grid over the exponent range used for the infimum in V_n.
_P_GRID_POINTS: Final = 65
# Upper bound on the offspring one cell may keep as leaves.
MAX_LEAVES_PER_CELL: Final = 2_000_000


class ModelParameterError(ValueError):
    """Raised for model parameters that break the construction rules."""


@dataclass(frozen=True, slots=True)
class SeriesFamily:
    """Ratio sequence V_n = factor^n * inf_{p in p_range} (n^-p - (n+1)^-p).

    ``bound_constant`` and ``factor`` give the domination V_n <= C * q^n.
    """

    factor: float
    p_range: tuple[float, float]
    bound_constant: float = 0.5

    def log_values(self, ns: np.ndarray) -> np.ndarray:
        ns = np.asarray(ns, dtype=np.float64)
        return ns * math.log(self.factor) + _log_gap_inf(ns, *self.p_range)

    def tail_bound(self, n_terms: int, beta: float) -> float:
        """Bound on sum_{n > n_terms} V_n^beta from the domination."""
        q_beta = self.factor**beta
        return (
            self.bound_constant**beta * q_beta ** (n_terms + 1) / (1 - q_beta)
        )

    def last_at_least(self, min_ratio: float) -> int:
        """Largest n with V_n >= min_ratio, 0 if there is none."""
        if not min_ratio > 0 or math.isinf(min_ratio):
            return 0
        ceiling = math.log(min_ratio / self.bound_constant) / math.log(
            self.factor
        )
        if ceiling < 1:
            return 0
        ns = np.arange(1, math.floor(ceiling) + 2)
        return int(np.count_nonzero(self.log_values(ns) >= math.log(min_ratio)))


def _log_gap(ns: np.ndarray, ps: np.ndarray) -> np.ndarray:
    # log(n^-p - (n+1)^-p), without cancellation for large n
    return -ps * np.log(ns) + np.log(-np.expm1(-ps * np.log1p(1.0 / ns)))


def _log_gap_inf(ns: np.ndarray, p_lo: float, p_hi: float) -> np.ndarray:
    """log inf_{p in [p_lo, p_hi]} (n^-p - (n+1)^-p), elementwise in n."""
    grid = np.linspace(p_lo, p_hi, _P_GRID_POINTS)
    values = _log_gap(ns[:, None], grid[None, :])
    best = np.argmin(values, axis=1)
    result = values[np.arange(ns.size), best]
    interior = np.flatnonzero((best > 0) & (best < _P_GRID_POINTS - 1))
    for i in interior:
        n = ns[i]
        lo, hi = grid[best[i] - 1], grid[best[i] + 1]
        polished = optimize.minimize_scalar(
            lambda p, n=n: float(_log_gap(n, p)),
            bounds=(lo, hi),
            method="bounded",
        )
        result[i] = min(result[i], float(polished.fun))
    return result


EXAMPLE1_SERIES: Final = SeriesFamily(factor=1.0 / 16.0, p_range=(1.0, 2.0))
EXAMPLE2_SERIES: Final = SeriesFamily(factor=1.0 / 1024.0, p_range=(1.0, 4.0))
EXAMPLE2_DEEP_EXPONENT: Final = 4.0


@lru_cache(maxsize=4096)
def vn_example1(n: int) -> float:
    """V_n = 16^-n * inf_{1 <= p <= 2} (1/n^p - 1/(n+1)^p)."""
    if n < 1:
        msg = f"n must be at least 1, got {n}"
        raise ModelParameterError(msg)
    return math.exp(float(EXAMPLE1_SERIES.log_values(np.array([n]))[0]))


@lru_cache(maxsize=4096)
def vn_example2(n: int) -> float:
    """V_n = 1024^-n * inf_{1 <= p <= 4} (1/n^p - 1/(n+1)^p)."""
    if n < 1:
        msg = f"n must be at least 1, got {n}"
        raise ModelParameterError(msg)
    return math.exp(float(EXAMPLE2_SERIES.log_values(np.array([n]))[0]))


def resolved_count(p: float, spacing: float, start: int = 1) -> int:
    """Largest N such that 1/n^p for start <= n <= N are spacing apart.

    The point 1/start^p is always kept; n > start is kept while
    1/(n-1)^p - 1/n^p >= spacing. The gaps decrease in n and are at most
    p * (n-1)^(-p-1), which bounds the search.
    """
    if not spacing > 0:
        msg = "spacing must be positive"
        raise ValueError(msg)
    if spacing > 1.0:
        return start
    last = math.floor(1.0 + (p / spacing) ** (1.0 / (p + 1.0))) + 2
    last = min(max(last, start + 1), start + MAX_LEAVES_PER_CELL)
    ns = np.arange(start + 1, last + 1, dtype=np.float64)
    gaps = np.exp(_log_gap(ns - 1.0, np.full_like(ns, p)))
    short = np.flatnonzero(gaps < spacing)
    if short.size == 0:
        return int(ns[-1])
    return start + int(short[0])


class RatioLawKind(StrEnum):
    UNIFORM = "uniform"
    DEGENERATE = "degenerate"


@dataclass(frozen=True, slots=True)
class RatioLaw:
    """Law of a single reduction ratio: uniform on [low, high] or a point."""

    kind: RatioLawKind
    low: float
    high: float

    def __post_init__(self) -> None:
        if not 0.0 < self.low <= self.high < 1.0:
            msg = (
                "ratio law support must satisfy 0 < low <= high < 1, got "
                f"[{self.low}, {self.high}]"
            )
            raise ModelParameterError(msg)
        if self.kind is RatioLawKind.DEGENERATE and self.low != self.high:
            msg = "degenerate ratio law needs low == high"
            raise ModelParameterError(msg)

    @classmethod
    def uniform(cls, low: float, high: float) -> "RatioLaw":
        return cls(kind=RatioLawKind.UNIFORM, low=low, high=high)

    @classmethod
    def degenerate(cls, value: float) -> "RatioLaw":
        return cls(kind=RatioLawKind.DEGENERATE, low=value, high=value)

    @property
    def distribution(self) -> "stats.rv_continuous | None":
        if self.kind is RatioLawKind.DEGENERATE:
            return None
        return stats.uniform(loc=self.low, scale=self.high - self.low)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        dist = self.distribution
        if dist is None:
            return np.full(size, self.low)
        return np.asarray(dist.rvs(size=size, random_state=rng))


def _packed_maps(ratios: Sequence[float]) -> list[SimilarityMap]:
    """Place cells of the given ratios left to right with equal gaps."""
    count = len(ratios)
    if count == 1:
        return [SimilarityMap(ratio=ratios[0], offset=0.0)]
    gap = (1.0 - math.fsum(ratios)) / (count - 1)
    maps = []
    offset = 0.0
    for i, ratio in enumerate(ratios):
        if i == count - 1:
            offset = 1.0 - ratio
        maps.append(SimilarityMap(ratio=ratio, offset=offset))
        offset += ratio + gap
    return maps


def _finite_batch(
    maps: Sequence[SimilarityMap | None], cutoff: Cutoff
) -> OffspringBatch:
    """Split finitely many children into expanded, leaf and dropped ones."""
    children: list[Offspring] = []
    dropped: list[SimilarityMap] = []
    last_leaf: float | None = None
    for digit, local in enumerate(maps, start=1):
        if local is None:
            children.append(Offspring(digit=digit, local=None))
        elif local.ratio >= cutoff.min_ratio:
            children.append(Offspring(digit=digit, local=local))
        elif cutoff.leaf_spacing is not None and (
            last_leaf is None
            or local.offset - last_leaf >= cutoff.leaf_spacing
        ):
            children.append(Offspring(digit=digit, local=local, leaf=True))
            last_leaf = local.offset
        else:
            dropped.append(local)
    if not dropped:
        return OffspringBatch(children=tuple(children))
    ratios = np.array([m.ratio for m in dropped])
    return OffspringBatch(
        children=tuple(children),
        omitted=len(dropped),
        omitted_hull=(
            min(m.offset for m in dropped),
            max(m.offset + m.ratio for m in dropped),
        ),
        tail_bound=lambda t: float(np.sum(ratios**t)),
    )


@dataclass(frozen=True, slots=True)
class CantorGenerator:
    ratio: float
    arity: int

    def draw_globals(self, rng: np.random.Generator) -> dict[str, float]:  # noqa: ARG002
        return {}

    def offspring(self, ctx: NodeContext, cutoff: Cutoff) -> OffspringBatch:  # noqa: ARG002
        return _finite_batch(_packed_maps([self.ratio] * self.arity), cutoff)

    def sample_ratios(self, rng: np.random.Generator) -> np.ndarray:  # noqa: ARG002
        return np.full(self.arity, self.ratio)

    def log_ratios(self, n_terms: int) -> np.ndarray:
        return np.full(min(n_terms, self.arity), math.log(self.ratio))

    def ratio_tail_bound(self, n_terms: int, beta: float) -> float:
        return max(self.arity - n_terms, 0) * self.ratio**beta


def cantor(ratio: float, arity: int) -> ModelSpec:
    """Deterministic model with ``arity`` equally spaced children.

    Raises:
        ModelParameterError: If the children cannot fit without overlap.
    """
    if arity < 1:
        msg = "arity must be at least 1"
        raise ModelParameterError(msg)
    if not 0.0 < ratio < 1.0:
        msg = f"ratio must lie in (0, 1), got {ratio!r}"
        raise ModelParameterError(msg)
    if arity * ratio > 1.0:
        msg = f"{arity} children of ratio {ratio} cannot satisfy the OSC"
        raise ModelParameterError(msg)
    return ModelSpec(
        name="cantor",
        parameters={"ratio": ratio, "arity": arity},
        flags=ModelFlags(
            deterministic_ratios=True,
            self_similar=True,
            finite_branching=True,
        ),
        generator=CantorGenerator(ratio=ratio, arity=arity),
    )


@dataclass(frozen=True, slots=True)
class HomogeneousGenerator:
    law: RatioLaw
    arity: int
    keep_probability: float

    def draw_globals(self, rng: np.random.Generator) -> dict[str, float]:  # noqa: ARG002
        return {}

    def _draw(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        # Ratios first, then the killing coins, so every node consumes the
        # same number of draws whatever the outcome.
        ratios = self.law.sample(rng, self.arity)
        kept = rng.random(self.arity) < self.keep_probability
        return ratios, kept

    def offspring(self, ctx: NodeContext, cutoff: Cutoff) -> OffspringBatch:
        ratios, kept = self._draw(ctx.rng)
        maps = _packed_maps(ratios.tolist())
        return _finite_batch(
            [m if k else None for m, k in zip(maps, kept, strict=True)],
            cutoff,
        )

    def sample_ratios(self, rng: np.random.Generator) -> np.ndarray:
        ratios, kept = self._draw(rng)
        return ratios[kept]

    def log_ratios(self, n_terms: int) -> np.ndarray | None:
        if (
            self.law.kind is RatioLawKind.UNIFORM
            or self.keep_probability < 1.0
        ):
            return None
        return np.full(min(n_terms, self.arity), math.log(self.law.low))

    def ratio_tail_bound(self, n_terms: int, beta: float) -> float:
        return max(self.arity - n_terms, 0) * self.law.high**beta


def homogeneous_random(
    ratio_law: RatioLaw, arity: int, *, keep_probability: float = 1.0
) -> ModelSpec:
    """Every cell draws ``arity`` i.i.d. ratios, packed with equal gaps.

    Args:
        ratio_law: Law of each ratio.
        arity: Number of offspring slots per cell.
        keep_probability: Each child survives independently with this
            probability; below 1 the construction can die out.

    Raises:
        ModelParameterError: If ``arity`` ratios from the support may not
            fit in the parent.
    """
    if arity < 1:
        msg = "arity must be at least 1"
        raise ModelParameterError(msg)
    if arity * ratio_law.high > 1.0:
        msg = (
            f"{arity} children with ratios up to {ratio_law.high} "
            "cannot satisfy the OSC"
        )
        raise ModelParameterError(msg)
    if not 0.0 < keep_probability <= 1.0:
        msg = "keep_probability must lie in (0, 1]"
        raise ModelParameterError(msg)
    deterministic = (
        ratio_law.kind is RatioLawKind.DEGENERATE and keep_probability == 1.0
    )
    return ModelSpec(
        name="homogeneous",
        parameters={
            "ratio_low": ratio_law.low,
            "ratio_high": ratio_law.high,
            "arity": arity,
            "keep_probability": keep_probability,
        },
        flags=ModelFlags(
            deterministic_ratios=deterministic,
            self_similar=True,
            finite_branching=True,
        ),
        generator=HomogeneousGenerator(
            law=ratio_law, arity=arity, keep_probability=keep_probability
        ),
    )


@dataclass(frozen=True, slots=True)
class SeriesGenerator:
    """Infinitely branching law: child n has right end 1/n^p, ratio V_n.

    The exponent is ``globals["p"]`` for the children of the root and
    ``deep_exponent`` below, when that is set.
    """

    series: SeriesFamily
    fixed_p: float | None
    deep_exponent: float | None = None

    def draw_globals(self, rng: np.random.Generator) -> dict[str, float]:
        if self.fixed_p is not None:
            return {"p": self.fixed_p}
        return {"p": float(rng.uniform(1.0, 2.0))}

    def exponent(self, ctx: NodeContext) -> float:
        if self.deep_exponent is not None and ctx.level > 0:
            return self.deep_exponent
        return ctx.globals["p"]

    def offspring(self, ctx: NodeContext, cutoff: Cutoff) -> OffspringBatch:
        p = self.exponent(ctx)
        expanded = self.series.last_at_least(cutoff.min_ratio)
        kept = expanded
        if cutoff.leaf_spacing is not None:
            kept = max(
                expanded, resolved_count(p, cutoff.leaf_spacing, expanded + 1)
            )
        ns = np.arange(1, kept + 1, dtype=np.float64)
        ratios = np.exp(self.series.log_values(ns))
        rights = ns**-p
        children = tuple(
            Offspring(
                digit=n,
                local=SimilarityMap(
                    ratio=float(ratio), offset=float(max(right - ratio, 0.0))
                ),
                leaf=n > expanded,
            )
            for n, ratio, right in zip(
                range(1, kept + 1), ratios, rights, strict=True
            )
        )
        return OffspringBatch(
            children=children,
            omitted=None,
            omitted_hull=(0.0, float((kept + 1) ** -p)),
            tail_bound=lambda t: self.series.tail_bound(kept, t),
        )

    def sample_ratios(self, rng: np.random.Generator) -> np.ndarray:  # noqa: ARG002
        msg = "ratios of an infinitely branching model are not sampled"
        raise NotImplementedError(msg)

    def log_ratios(self, n_terms: int) -> np.ndarray:
        return self.series.log_values(np.arange(1, n_terms + 1))

    def ratio_tail_bound(self, n_terms: int, beta: float) -> float:
        return self.series.tail_bound(n_terms, beta)


def _check_p(p: float | None) -> None:
    if p is not None and not 1.0 <= p <= 2.0:
        msg = f"p must lie in [1, 2], got {p!r}"
        raise ModelParameterError(msg)


def example1(p: float | None = None) -> ModelSpec:
    """Child n of every cell is [1/n^p - V_n, 1/n^p] in the cell's frame.

    Args:
        p: Fixed exponent in [1, 2]; None draws p uniformly on [1, 2] once
            per realization.
    """
    _check_p(p)
    return ModelSpec(
        name="example1",
        parameters={} if p is None else {"p": p},
        flags=ModelFlags(
            deterministic_ratios=True,
            self_similar=p is not None,
            finite_branching=False,
        ),
        generator=SeriesGenerator(series=EXAMPLE1_SERIES, fixed_p=p),
    )


def example2(p: float | None = None) -> ModelSpec:
    """Right ends 1/n^p at level 1, 1/n^4 below; ratios from vn_example2.

    Args:
        p: Fixed level-1 exponent in [1, 2]; None draws it per realization.
    """
    _check_p(p)
    return ModelSpec(
        name="example2",
        parameters={} if p is None else {"p": p},
        flags=ModelFlags(
            deterministic_ratios=True,
            self_similar=False,
            finite_branching=False,
            level_dependent=True,
            self_similar_from_level=1,
        ),
        generator=SeriesGenerator(
            series=EXAMPLE2_SERIES,
            fixed_p=p,
            deep_exponent=EXAMPLE2_DEEP_EXPONENT,
        ),
    )


def orbit_set(p: float, cutoff: float) -> geometry.CompactSet:
    """The points 1/n^p, n >= 1, kept while consecutive gaps are >= cutoff.

    Raises:
        ModelParameterError: If p or cutoff is not positive.
    """
    if not p > 0 or not cutoff > 0:
        msg = "p and cutoff must be positive"
        raise ModelParameterError(msg)
    count = resolved_count(p, cutoff)
    ns = np.arange(1, count + 1, dtype=np.float64)
    points = geometry.from_points(ns**-p)
    logger.debug("built orbit set", p=p, cutoff=cutoff, points=count)
    if not isinstance(points, geometry.CompactSet):
        msg = "orbit set is never empty"
        raise AssertionError(msg)
    return points


class ModelName(StrEnum):
    CANTOR = "cantor"
    HOMOGENEOUS = "homogeneous"
    EXAMPLE1 = "example1"
    EXAMPLE2 = "example2"
    ORBIT_SET = "orbit_set"


def build_model(config: "ModelConfig") -> ModelSpec:
    """Construction model named by a model config.

    Raises:
        ModelParameterError: For ``orbit_set``, which is a point set rather
            than a construction, and for invalid parameters.
    """
    match config.name:
        case ModelName.CANTOR:
            return cantor(config.ratio, config.arity)
        case ModelName.HOMOGENEOUS:
            low = (
                config.ratio if config.ratio_low is None else config.ratio_low
            )
            high = (
                config.ratio_high if config.ratio_high is not None else low
            )
            law = (
                RatioLaw.degenerate(low)
                if low == high
                else RatioLaw.uniform(low, high)
            )
            return homogeneous_random(
                law, config.arity, keep_probability=config.keep_probability
            )
        case ModelName.EXAMPLE1:
            return example1(config.p)
        case ModelName.EXAMPLE2:
            return example2(config.p)
        case _:
            msg = f"model {config.name} is not a construction"
            raise ModelParameterError(msg)
