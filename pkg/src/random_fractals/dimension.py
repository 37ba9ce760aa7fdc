"""Dimension computations for random recursive constructions.

The Hausdorff exponent alpha is the root of E[sum_i T_i^beta] = 1. Box
dimensions come from log-log regression of count tables; orbit dimensions
apply the same regression to the images of a reference point under the
first-generation maps of a cell.
"""

import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Final

import numpy as np
import structlog
from scipy import stats

from random_fractals import addressing, construction, geometry, replicas
from random_fractals.addressing import Address
from random_fractals.construction import (
    ModelSpec,
    Realization,
    Semantics,
    UnresolvedStoppingSetError,
)
from random_fractals.geometry import CountRow

logger = structlog.get_logger()

ALPHA_BRACKET: Final = (1e-6, 1.0)
EXACT_TOLERANCE: Final = 1e-9
MONTE_CARLO_TOLERANCE: Final = 1e-3
MONTE_CARLO_SAMPLES: Final = 10_000
CONFIDENCE: Final = 0.99
# Terms summed before the series tail is added; doubled while undecided.
_INITIAL_TERMS: Final = 32
_MAX_TERMS: Final = 1 << 14
MIN_FIT_ROWS: Final = 4
# Rows used by the automatic fit window.
MIN_WINDOW_COUNT: Final = 10
MAX_WINDOW_FRACTION: Final = 0.5
# Balls hidden in the truncated tail of an orbit, relative to counted ones.
MAX_TAIL_FRACTION: Final = 0.01
MAX_ORBIT_POINTS: Final = 200_000
ORBIT_REFINEMENT: Final = 0.1
MIN_ORBIT_RESOLUTION: Final = 1e-15
ANTICHAIN_MARGIN: Final = 0.02
STOPPING_SHRINK: Final = 0.2
_MAX_EXTRA_DEPTH: Final = 24


class SubcriticalModelError(ValueError):
    """Raised when E[sum T_i^beta] = 1 has no root in the search bracket."""


class InsufficientDataError(ValueError):
    """Raised when a regression has too few usable rows."""


class HypothesisViolatedError(ValueError):
    """Raised when a statement is evaluated outside its hypotheses."""


class NotApplicableError(ValueError):
    """Raised when a check does not apply to the given model."""


class CurveMode(StrEnum):
    EXACT = "exact"
    MONTE_CARLO = "monte-carlo"


class CountType(StrEnum):
    COVERING = "covering"
    PACKING = "packing"


class EstimateMode(StrEnum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass
class ExpectedSumCurve:
    """beta -> E[sum_i T_i^beta], either as a series or by Monte Carlo.

    Exact curves hold a function returning the log ratios of the first n
    offspring (largest first) and a bound on the remaining terms. Monte
    Carlo curves hold a fixed sample of ratio vectors, zero padded, so every
    beta is evaluated on the same draws.
    """

    mode: CurveMode
    log_terms: Callable[[int], np.ndarray] | None = None
    tail: Callable[[int, float], float] | None = None
    samples: np.ndarray | None = None
    confidence: float = CONFIDENCE
    _cache: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @classmethod
    def from_ratios(cls, ratios: Sequence[float]) -> "ExpectedSumCurve":
        """Exact curve of a fixed finite ratio vector."""
        values = np.asarray(ratios, dtype=np.float64)
        if np.any(values <= 0) or np.any(values >= 1):
            msg = "ratios must lie in (0, 1)"
            raise ValueError(msg)
        logs = np.sort(np.log(values))[::-1]
        return cls(
            mode=CurveMode.EXACT,
            log_terms=lambda n: logs[:n],
            tail=lambda n, beta: float(np.sum(np.exp(beta * logs[n:]))),
        )

    @classmethod
    def from_samples(
        cls, samples: Sequence[np.ndarray], confidence: float = CONFIDENCE
    ) -> "ExpectedSumCurve":
        width = max((len(s) for s in samples), default=0)
        padded = np.zeros((len(samples), max(width, 1)))
        for i, s in enumerate(samples):
            padded[i, : len(s)] = s
        return cls(
            mode=CurveMode.MONTE_CARLO, samples=padded, confidence=confidence
        )

    def terms(self, n: int) -> np.ndarray:
        if self.log_terms is None:
            msg = "Monte Carlo curves have no series terms"
            raise ValueError(msg)
        if n not in self._cache:
            self._cache[n] = np.asarray(self.log_terms(n), dtype=np.float64)
        return self._cache[n]


@dataclass(frozen=True, slots=True)
class SumEvaluation:
    """Value of E[sum T_i^beta] with its error bar.

    Exact evaluations lie in ``[value, value + tail]``; Monte Carlo ones in
    ``value +- half_width`` at the curve's confidence. ``divergent`` marks a
    beta where the series tail is not finite, and ``value`` is then inf.
    """

    beta: float
    mode: CurveMode
    value: float
    tail: float = 0.0
    half_width: float = 0.0
    n_terms: int = 0
    divergent: bool = False

    @property
    def lower(self) -> float:
        return self.value - self.half_width

    @property
    def upper(self) -> float:
        return self.value + self.tail + self.half_width


def _z(confidence: float) -> float:
    return float(stats.norm.ppf(0.5 + confidence / 2.0))


def _exact_sum(curve: ExpectedSumCurve, beta: float, n: int) -> SumEvaluation:
    if curve.tail is None:
        msg = "exact curves need a tail bound"
        raise ValueError(msg)
    logs = curve.terms(n)
    partial = math.fsum(np.exp(beta * logs).tolist())
    tail = curve.tail(len(logs), beta)
    if not math.isfinite(tail):
        return SumEvaluation(
            beta=beta,
            mode=curve.mode,
            value=math.inf,
            tail=math.inf,
            n_terms=len(logs),
            divergent=True,
        )
    return SumEvaluation(
        beta=beta, mode=curve.mode, value=partial, tail=tail, n_terms=len(logs)
    )


def _sample_sums(curve: ExpectedSumCurve, beta: float) -> np.ndarray:
    if curve.samples is None:
        msg = "Monte Carlo curves need samples"
        raise ValueError(msg)
    # Zero padding contributes 0 ** beta = 0.
    return np.sum(curve.samples**beta, axis=1)


def expected_sum_ratios(
    curve: ExpectedSumCurve, beta: float, *, n_terms: int = _INITIAL_TERMS
) -> SumEvaluation:
    """E[sum_i T_i^beta] with a certified tail or a confidence half-width.

    Raises:
        ValueError: If beta is not positive.
    """
    if not beta > 0:
        msg = f"beta must be positive, got {beta!r}"
        raise ValueError(msg)
    if curve.mode is CurveMode.EXACT:
        return _exact_sum(curve, beta, n_terms)
    sums = _sample_sums(curve, beta)
    half_width = math.inf
    if sums.size > 1:
        spread = float(np.std(sums, ddof=1))
        half_width = _z(curve.confidence) * spread / math.sqrt(sums.size)
    return SumEvaluation(
        beta=beta,
        mode=curve.mode,
        value=float(np.mean(sums)),
        half_width=half_width,
    )


def _exact_sign(
    curve: ExpectedSumCurve, beta: float
) -> tuple[int, SumEvaluation]:
    """Sign of E[sum T^beta] - 1, growing the series until it is decided.

    Returns 0 when the value equals 1 exactly or stays undecided at the
    largest number of terms.
    """
    n = _INITIAL_TERMS
    while True:
        evaluation = _exact_sum(curve, beta, n)
        if evaluation.divergent or evaluation.value > 1.0:
            return 1, evaluation
        if evaluation.value + evaluation.tail < 1.0:
            return -1, evaluation
        if evaluation.tail == 0.0 or n >= _MAX_TERMS:
            return 0, evaluation
        n *= 2


@dataclass(frozen=True, slots=True)
class AlphaSolution:
    alpha: float
    bracket: tuple[float, float]
    residual: float
    tail_bound_at_alpha: float
    mode: CurveMode
    n_terms: int = 0


def _bisect(
    sign: Callable[[float], int], lo: float, hi: float, tol: float
) -> tuple[float, float]:
    """Shrink [lo, hi] around the change of a decreasing sign function."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        s = sign(mid)
        if s > 0:
            lo = mid
        elif s < 0:
            hi = mid
        else:
            return mid, mid
    return lo, hi


def solve_alpha(
    curve: ExpectedSumCurve, tol: float | None = None
) -> AlphaSolution:
    """Solve E[sum T_i^alpha] = 1 for alpha by bisection on [1e-6, 1].

    Args:
        curve: The expected-sum curve.
        tol: Width of the final bracket; 1e-9 for exact curves and 1e-3
            for Monte Carlo curves by default.

    Returns:
        The root with its bracket. For Monte Carlo curves the bracket spans
        the roots of mean -+ half-width = 1.

    Raises:
        SubcriticalModelError: If the curve does not cross 1 in the bracket.
    """
    lo, hi = ALPHA_BRACKET
    if curve.mode is CurveMode.EXACT:
        tol = EXACT_TOLERANCE if tol is None else tol
        if _exact_sign(curve, lo)[0] <= 0:
            msg = "subcritical or degenerate: E[sum T^beta] <= 1 near 0"
            raise SubcriticalModelError(msg)
        if _exact_sign(curve, hi)[0] > 0:
            msg = "subcritical or degenerate: E[sum T] exceeds 1"
            raise SubcriticalModelError(msg)
        a, b = _bisect(lambda beta: _exact_sign(curve, beta)[0], lo, hi, tol)
        alpha = 0.5 * (a + b)
        _, at_alpha = _exact_sign(curve, alpha)
        solution = AlphaSolution(
            alpha=alpha,
            bracket=(a, b),
            residual=abs(at_alpha.value - 1.0) + at_alpha.tail,
            tail_bound_at_alpha=at_alpha.tail,
            mode=curve.mode,
            n_terms=at_alpha.n_terms,
        )
    else:
        tol = MONTE_CARLO_TOLERANCE if tol is None else tol
        z = _z(curve.confidence)

        def shifted_sign(beta: float, shift: float) -> int:
            sums = _sample_sums(curve, beta)
            hw = z * float(np.std(sums, ddof=1)) / math.sqrt(sums.size)
            return int(np.sign(float(np.mean(sums)) + shift * hw - 1.0))

        if shifted_sign(lo, 0.0) <= 0:
            msg = "subcritical or degenerate: E[sum T^beta] <= 1 near 0"
            raise SubcriticalModelError(msg)
        if shifted_sign(hi, 0.0) > 0:
            msg = "subcritical or degenerate: E[sum T] exceeds 1"
            raise SubcriticalModelError(msg)
        center = _bisect(lambda b: shifted_sign(b, 0.0), lo, hi, tol)
        low = _bisect(lambda b: shifted_sign(b, -1.0), lo, hi, tol)
        high = _bisect(lambda b: shifted_sign(b, 1.0), lo, hi, tol)
        alpha = 0.5 * sum(center)
        at_alpha = expected_sum_ratios(curve, alpha)
        solution = AlphaSolution(
            alpha=alpha,
            bracket=(min(low[0], center[0]), max(high[1], center[1])),
            residual=abs(at_alpha.value - 1.0) + at_alpha.half_width,
            tail_bound_at_alpha=0.0,
            mode=curve.mode,
        )
    logger.info(
        "solved alpha",
        alpha=solution.alpha,
        mode=solution.mode.value,
        residual=solution.residual,
    )
    return solution


def curve_for_model(
    model: ModelSpec,
    *,
    seed: int = 0,
    samples: int = MONTE_CARLO_SAMPLES,
    confidence: float = CONFIDENCE,
) -> ExpectedSumCurve:
    """Expected-sum curve of a model: exact when its ratios are fixed.

    Random ratio vectors are drawn from the replica streams of ``seed``.
    """
    generator = model.generator
    if generator.log_ratios(1) is not None:
        return ExpectedSumCurve(
            mode=CurveMode.EXACT,
            log_terms=lambda n: np.sort(generator.log_ratios(n))[::-1],
            tail=generator.ratio_tail_bound,
        )
    draws = [
        generator.sample_ratios(
            np.random.default_rng(addressing.replica_seed(seed, i, "ratios"))
        )
        for i in range(samples)
    ]
    return ExpectedSumCurve.from_samples(draws, confidence=confidence)


@dataclass(frozen=True, slots=True)
class DimensionEstimate:
    slope: float
    stderr: float
    fit_range: tuple[float, float]
    points_used: int
    count_type: CountType
    r_squared: float
    intercept: float = 0.0
    mode: EstimateMode = EstimateMode.UPPER
    clamped: bool = False
    window_shrunk: bool = False


type CountTable = Sequence[CountRow] | Sequence[tuple[float, int]]


def _pairs(table: CountTable, count_type: CountType) -> list[tuple[float, int]]:
    pairs = []
    for row in table:
        if isinstance(row, CountRow):
            count = (
                row.covering
                if count_type is CountType.COVERING
                else row.packing
            )
            pairs.append((row.r, count))
        else:
            pairs.append((float(row[0]), int(row[1])))
    return pairs


def _in_window(r: float, window: tuple[float, float] | None) -> bool:
    if window is None:
        return True
    r_min, r_max = window
    slack = 1e-12 * r_max
    return r_min - slack <= r <= r_max + slack


def estimate_box_dimension(
    table: CountTable,
    fit_window: tuple[float, float] | None = None,
    mode: EstimateMode = EstimateMode.UPPER,
    *,
    count_type: CountType = CountType.COVERING,
) -> DimensionEstimate:
    """Slope of log(count) against -log(r) over a window of scales.

    ``upper`` refits the rows on or above the ordinary line and keeps the
    larger of the two slopes; ``lower`` refits the rows on or below it and
    keeps the smaller, so upper >= ordinary >= lower. On exact power laws
    all three agree. The reported stderr and R^2 are those of the ordinary
    fit.

    Args:
        table: Count rows, or (r, count) pairs.
        fit_window: Inclusive (r_min, r_max); None uses every row.
        mode: ``upper`` or ``lower`` envelope.
        count_type: Which count of `CountRow` rows to use.

    Raises:
        InsufficientDataError: If fewer than 4 rows lie in the window or
            a count in the window is not positive.
    """
    rows = sorted(
        (p for p in _pairs(table, count_type) if _in_window(p[0], fit_window)),
        reverse=True,
    )
    if len(rows) < MIN_FIT_ROWS:
        msg = f"need at least {MIN_FIT_ROWS} rows in the fit window"
        raise InsufficientDataError(msg)
    if any(count <= 0 for _, count in rows):
        msg = "counts in the fit window must be positive"
        raise InsufficientDataError(msg)

    rs = np.array([r for r, _ in rows])
    counts = np.array([c for _, c in rows], dtype=np.float64)
    fit_range = (float(rs[-1]), float(rs[0]))
    if np.all(counts == counts[0]):
        return DimensionEstimate(
            slope=0.0,
            stderr=0.0,
            fit_range=fit_range,
            points_used=len(rows),
            count_type=count_type,
            r_squared=1.0,
            intercept=float(np.log(counts[0])),
            mode=mode,
        )

    x = -np.log(rs)
    y = np.log(counts)
    fit = stats.linregress(x, y)
    slope = float(fit.slope)
    residuals = y - (fit.intercept + fit.slope * x)
    side = residuals >= 0 if mode is EstimateMode.UPPER else residuals <= 0
    if np.unique(x[side]).size >= 2:  # noqa: PLR2004
        envelope = float(stats.linregress(x[side], y[side]).slope)
        slope = (
            max(slope, envelope)
            if mode is EstimateMode.UPPER
            else min(slope, envelope)
        )

    clamped = not 0.0 <= slope <= 1.0
    if clamped:
        logger.warning("clamped slope", slope=slope, fit_range=fit_range)
        slope = min(max(slope, 0.0), 1.0)
    return DimensionEstimate(
        slope=slope,
        stderr=max(float(fit.stderr), 0.0),
        fit_range=fit_range,
        points_used=len(rows),
        count_type=count_type,
        r_squared=float(fit.rvalue) ** 2,
        intercept=float(fit.intercept),
        mode=mode,
        clamped=clamped,
    )


def select_fit_window(
    table: Sequence[CountRow],
    available: int,
    *,
    count_type: CountType = CountType.COVERING,
) -> tuple[float, float]:
    """Scales whose count is at least 10 and at most half of ``available``.

    Args:
        table: The count table.
        available: Number of points or cells the counted set is made of.

    Raises:
        InsufficientDataError: If fewer than 4 rows qualify.
    """
    chosen = [
        r
        for r, count in _pairs(table, count_type)
        if MIN_WINDOW_COUNT <= count <= MAX_WINDOW_FRACTION * available
    ]
    if len(chosen) < MIN_FIT_ROWS:
        msg = (
            f"only {len(chosen)} scales have counts in "
            f"[{MIN_WINDOW_COUNT}, {MAX_WINDOW_FRACTION * available:g}]"
        )
        raise InsufficientDataError(msg)
    return (min(chosen), max(chosen))


def _hidden_balls(
    orbit: construction.Orbit, table: Sequence[CountRow]
) -> list[int]:
    """Extra balls needed at each scale once the truncated tail is added."""
    if not orbit.omitted_hulls:
        return [0] * len(table)
    padded = geometry.union(
        [orbit.points, geometry.normalize(orbit.omitted_hulls)]
    )
    return [
        geometry.covering_number(padded, row.r) - row.covering
        for row in table
    ]


def estimate_orbit_dimension(
    rz: Realization,
    base: Address,
    x: float,
    scales: Sequence[float],
    *,
    mode: EstimateMode = EstimateMode.UPPER,
    count_type: CountType = CountType.COVERING,
) -> DimensionEstimate:
    """Box dimension of the first-generation orbit of x below ``base``.

    Scales are relative to the diameter of the base cell: the orbit is
    regenerated from the model in the base cell's own frame. Its resolution
    starts at a tenth of the smallest scale and is refined until the balls
    hiding in the truncated tail are fewer than 1% of the counted ones;
    failing that, the smallest scales are dropped and the shrink reported.

    Raises:
        EmptyCellError: If the base cell is empty.
        InsufficientDataError: If a truncated orbit has fewer than 4
            points or too few scales survive.
    """
    geometry.check_scales(scales)
    resolution = min(scales) * ORBIT_REFINEMENT
    while True:
        orbit = construction.orbit(
            rz, base, x, 1, frame="local", resolution=resolution
        )
        size = len(orbit.points)
        table = geometry.count_table(orbit.points, scales)
        hidden_ok = [
            hidden < MAX_TAIL_FRACTION * row.covering
            for hidden, row in zip(
                _hidden_balls(orbit, table), table, strict=True
            )
        ]
        if (
            all(hidden_ok)
            or not orbit.omitted_hulls
            or size >= MAX_ORBIT_POINTS
            or resolution < MIN_ORBIT_RESOLUTION
        ):
            break
        resolution *= ORBIT_REFINEMENT

    if size == 0 or (orbit.omitted != 0 and size < MIN_FIT_ROWS):
        msg = "orbit too small"
        raise InsufficientDataError(msg)

    kept = list(scales)
    while kept and not hidden_ok[len(kept) - 1]:
        kept.pop()
    shrunk = len(kept) < len(scales)
    if shrunk:
        logger.warning(
            "shrunk orbit fit window",
            base=addressing.format_address(base),
            r_min=kept[-1] if kept else None,
            dropped=len(scales) - len(kept),
        )
    if len(kept) < MIN_FIT_ROWS:
        msg = "orbit too small: truncation hides the fine scales"
        raise InsufficientDataError(msg)
    estimate = estimate_box_dimension(
        table[: len(kept)], mode=mode, count_type=count_type
    )
    return DimensionEstimate(
        slope=estimate.slope,
        stderr=estimate.stderr,
        fit_range=estimate.fit_range,
        points_used=estimate.points_used,
        count_type=estimate.count_type,
        r_squared=estimate.r_squared,
        intercept=estimate.intercept,
        mode=estimate.mode,
        clamped=estimate.clamped,
        window_shrunk=shrunk,
    )


@dataclass(frozen=True, slots=True)
class XIndependenceReport:
    first: DimensionEstimate
    second: DimensionEstimate
    difference: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.difference <= self.tolerance


def x_independence_check(
    rz: Realization,
    base: Address,
    x1: float,
    x2: float,
    scales: Sequence[float],
) -> XIndependenceReport:
    """Compare orbit dimensions for two reference points.

    The estimates agree when they differ by at most three combined
    standard errors.
    """
    first = estimate_orbit_dimension(rz, base, x1, scales)
    second = (
        first if x1 == x2 else estimate_orbit_dimension(rz, base, x2, scales)
    )
    return XIndependenceReport(
        first=first,
        second=second,
        difference=abs(first.slope - second.slope),
        tolerance=3.0 * math.hypot(first.stderr, second.stderr),
    )


@dataclass(frozen=True, slots=True)
class GammaEstimate:
    value: float
    argmax: Address | None
    per_base: dict[Address, float]
    skipped: tuple[Address, ...] = ()


def _bases(rz: Realization, bases: Iterable[Address] | int) -> list[Address]:
    if isinstance(bases, int):
        cap = min(bases, rz.max_depth)
        return [
            n.address
            for k in range(cap + 1)
            for n in rz.alive_at(k)
            if not n.leaf
        ]
    return list(bases)


def _gamma(
    rz: Realization,
    bases: Iterable[Address] | int,
    x: float,
    scales: Sequence[float],
    mode: EstimateMode,
) -> GammaEstimate:
    per_base: dict[Address, float] = {}
    skipped: list[Address] = []
    for base in _bases(rz, bases):
        try:
            estimate = estimate_orbit_dimension(rz, base, x, scales, mode=mode)
        except InsufficientDataError as e:
            logger.warning(
                "skipped orbit",
                base=addressing.format_address(base),
                reason=str(e),
            )
            skipped.append(base)
            continue
        per_base[base] = estimate.slope
    if not per_base:
        return GammaEstimate(
            value=0.0, argmax=None, per_base={}, skipped=tuple(skipped)
        )
    argmax = max(per_base, key=per_base.__getitem__)
    return GammaEstimate(
        value=per_base[argmax],
        argmax=argmax,
        per_base=per_base,
        skipped=tuple(skipped),
    )


def estimate_gamma_sup(
    rz: Realization,
    bases: Iterable[Address] | int,
    x: float,
    scales: Sequence[float],
) -> GammaEstimate:
    """Largest upper orbit dimension over a set of bases.

    Args:
        rz: The realization.
        bases: Explicit base addresses, or a level cap: every alive
            non-leaf cell at levels 0 to cap.
        x: Reference point.
        scales: Relative scales passed to `estimate_orbit_dimension`.

    Returns:
        The supremum with the address that attains it; orbits too small to
        estimate are skipped with a warning.
    """
    return _gamma(rz, bases, x, scales, EstimateMode.UPPER)


def estimate_gamma_lower(
    rz: Realization,
    bases: Iterable[Address] | int,
    x: float,
    scales: Sequence[float],
) -> GammaEstimate:
    """Largest lower orbit dimension over a set of bases."""
    return _gamma(rz, bases, x, scales, EstimateMode.LOWER)


def _check_unit(**values: float) -> None:
    for name, value in values.items():
        if not 0.0 <= value <= 1.0:
            msg = f"{name} must lie in [0, 1], got {value!r}"
            raise ValueError(msg)


def eval_mink(alpha: float, gamma: float) -> float:
    """Upper box dimension max{dim_H K, gamma_sup} of a nonempty K."""
    _check_unit(alpha=alpha, gamma=gamma)
    return max(alpha, gamma)


def eval_mink_lower(alpha: float, gamma_lower: float) -> float:
    """Lower box dimension max{dim_H K, gamma_lower} of a nonempty K."""
    _check_unit(alpha=alpha, gamma_lower=gamma_lower)
    return max(alpha, gamma_lower)


class NotApplicable(StrEnum):
    NOT_APPLICABLE = "not applicable"


NOT_APPLICABLE: Final = NotApplicable.NOT_APPLICABLE


def eval_packsim(
    alpha: float, ess_sup_orbit_dim: float, *, self_similar: bool
) -> float | NotApplicable:
    """Packing dimension of a self-similar construction.

    Returns ``NOT_APPLICABLE`` for constructions that are not self-similar.
    """
    if not self_similar:
        return NOT_APPLICABLE
    _check_unit(alpha=alpha, ess_sup_orbit_dim=ess_sup_orbit_dim)
    return max(alpha, ess_sup_orbit_dim)


def packsim_applicable(model: ModelSpec, base_level: int) -> bool:
    """Whether subtrees rooted at ``base_level`` are self-similar."""
    return model.flags.self_similar_below(base_level)


def estimate_orbit_constant(
    rz: Realization,
    base: Address,
    x: float,
    t: float,
    scales: Sequence[float],
) -> float:
    """Smallest A with N_r(orbit) <= A * (r / l_base)^-t on the scales.

    Scales are relative to the base diameter.
    """
    points = construction.orbit(
        rz, base, x, 1, frame="local", resolution=min(scales) * ORBIT_REFINEMENT
    ).points
    return max(geometry.covering_number(points, r) * r**t for r in scales)


@dataclass(frozen=True, slots=True)
class AntichainReport:
    mean: float
    stderr: float
    bound: float
    p: float
    alpha: float
    replicas: int
    depth: int

    @property
    def passed(self) -> bool:
        return self.mean <= self.bound + 3.0 * self.stderr


class AntichainRule(StrEnum):
    STOPPING = "stopping"
    LEVEL = "level"


def _antichain_sum(
    rz: Realization, rule: AntichainRule, q: int, t: float, shrink: float
) -> float:
    if rule is AntichainRule.LEVEL:
        members = [n.address for n in rz.alive_at(q)]
    elif rz.extinct:
        return 0.0
    else:
        members = construction.stopping_set(rz, (), q, shrink)
    return math.fsum(rz.nodes[a].diameter ** t for a in members)


def antichain_moment_test(
    model: ModelSpec,
    t: float,
    q: int,
    replicas_count: int,
    seed: int,
    *,
    rule: AntichainRule = AntichainRule.STOPPING,
    shrink: float = STOPPING_SHRINK,
    eps_trunc: float = 1e-10,
    threads: int = 1,
) -> AntichainReport:
    """Empirical E[sum over an antichain of l^t] against p^q / (1 - p).

    p is an upper bound on E[sum T_i^t]: the partial sum plus its certified
    tail, or the upper confidence limit of a Monte Carlo curve. The default
    antichain is the stopping set of the root: the first cells at depth
    >= q smaller than ``shrink``.

    Raises:
        HypothesisViolatedError: If p >= 1 or t < alpha + 0.02.
    """
    curve = curve_for_model(model, seed=seed)
    p = expected_sum_ratios(curve, t).upper
    if p >= 1.0:
        msg = f"hypothesis violated: E[sum T^t] = {p:.6g} >= 1"
        raise HypothesisViolatedError(msg)
    alpha = solve_alpha(curve).alpha
    if t < alpha + ANTICHAIN_MARGIN:
        msg = f"hypothesis violated: t = {t} is below alpha + margin"
        raise HypothesisViolatedError(msg)

    def replica(index: int) -> tuple[float, int]:
        replica_seed = addressing.replica_seed(seed, index, "antichain")
        # Node streams are keyed by address, so a deeper resample extends
        # the same tree.
        for depth in range(q, q + _MAX_EXTRA_DEPTH + 1):
            rz = construction.sample_realization(
                model, replica_seed, depth, eps_trunc
            )
            try:
                return _antichain_sum(rz, rule, q, t, shrink), depth
            except UnresolvedStoppingSetError:
                continue
        msg = "stopping set is not resolved within the depth limit"
        raise InsufficientDataError(msg)

    results = replicas.run_replicas(replica, replicas_count, threads)
    sums = np.array([value for value, _ in results])
    stderr = (
        float(np.std(sums, ddof=1)) / math.sqrt(sums.size)
        if sums.size > 1
        else 0.0
    )
    report = AntichainReport(
        mean=float(np.mean(sums)),
        stderr=stderr,
        bound=p**q / (1.0 - p),
        p=p,
        alpha=alpha,
        replicas=replicas_count,
        depth=max((depth for _, depth in results), default=q),
    )
    logger.info(
        "antichain moment test",
        model=model.name,
        q=q,
        mean=report.mean,
        bound=report.bound,
        passed=report.passed,
    )
    return report


@dataclass(frozen=True, slots=True)
class CoincidenceReport:
    alpha: float
    mean_slope: float
    slopes: tuple[float, ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.mean_slope - self.alpha) <= self.tolerance


def finite_coincidence_check(
    model: ModelSpec,
    seed: int,
    depth: int,
    scales: Sequence[float],
    *,
    seeds: int = 1,
    tolerance: float = 0.05,
    threads: int = 1,
) -> CoincidenceReport:
    """Compare the box dimension of a deep level union with alpha.

    With finitely many offspring the Hausdorff, packing and box dimensions
    coincide. The slope is averaged over ``seeds`` realizations; the fit
    window follows `select_fit_window` with the number of level cells.

    Raises:
        NotApplicableError: If the model branches infinitely.
    """
    if not model.flags.finite_branching:
        msg = "not applicable: the model branches infinitely"
        raise NotApplicableError(msg)
    alpha = solve_alpha(curve_for_model(model, seed=seed)).alpha

    def replica(index: int) -> float:
        rz = construction.sample_surviving_realization(
            model,
            seed if index == 0 else addressing.replica_seed(seed, index),
            depth,
            eps_trunc=math.ulp(0.0),
            semantics=Semantics.RECURSIVE,
        )
        union = construction.level_union(rz, depth)
        table = geometry.count_table(union, scales)
        window = select_fit_window(table, len(rz.alive_at(depth)))
        return estimate_box_dimension(table, window).slope

    slopes = replicas.run_replicas(replica, seeds, threads)
    report = CoincidenceReport(
        alpha=alpha,
        mean_slope=float(np.mean(slopes)),
        slopes=tuple(slopes),
        tolerance=tolerance,
    )
    logger.info(
        "finite coincidence check",
        model=model.name,
        alpha=alpha,
        mean_slope=report.mean_slope,
        passed=report.passed,
    )
    return report


@dataclass(frozen=True, slots=True)
class EssInfReport:
    minimum: float
    argmin_p: float
    values: tuple[tuple[float, float], ...]


def example2_ess_inf(
    model: ModelSpec,
    seeds: Sequence[int],
    alpha: float,
    scales: Sequence[float],
    *,
    x: float = 1.0,
    threads: int = 1,
) -> EssInfReport:
    """Minimum over sampled level-1 exponents of max{alpha, gamma}.

    For every seed the root orbit of the realization (whose exponent is
    that seed's p) is estimated; the level-1 orbits contribute nothing
    larger since their exponent is fixed.
    """

    def replica(index: int) -> tuple[float, float]:
        rz = construction.sample_realization(model, seeds[index], 0, 1.0)
        gamma = estimate_orbit_dimension(rz, (), x, scales).slope
        return rz.globals["p"], eval_mink(alpha, gamma)

    values = replicas.run_replicas(replica, len(seeds), threads)
    if not values:
        msg = "need at least one seed"
        raise ValueError(msg)
    argmin_p, minimum = min(values, key=lambda v: v[1])
    return EssInfReport(
        minimum=minimum, argmin_p=argmin_p, values=tuple(values)
    )
