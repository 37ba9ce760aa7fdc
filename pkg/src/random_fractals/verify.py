"""Acceptance suite: numerical checks of the solvers, estimators and samplers.

Every check is a deterministic function of the suite seed. The ``quick``
suite runs the same checks as ``full`` with fewer trials and replicas.
"""

import itertools
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import StrEnum
from typing import Final

import numpy as np
import structlog

from random_fractals import (
    addressing,
    construction,
    dimension,
    export,
    geometry,
    models,
    replicas,
)
from random_fractals.geometry import CompactSet
from random_fractals.schemas import CheckResult, VerifyReport

logger = structlog.get_logger()

LOG2_LOG3: Final = math.log(2.0) / math.log(3.0)
# Grid of the exhaustive covering and packing oracles.
_ENDPOINT_GRID: Final = 16
_CENTER_GRID: Final = 1024


class Suite(StrEnum):
    QUICK = "quick"
    FULL = "full"


@dataclass(frozen=True, slots=True)
class SuiteSize:
    sandwich_trials: int
    greedy_trials: int
    metric_trials: int
    level_seeds: int
    antichain_replicas: int
    sampler_replicas: int
    coincidence_seeds: int
    probes: int
    ess_inf_samples: int


SUITE_SIZES: Final = {
    Suite.QUICK: SuiteSize(
        sandwich_trials=200,
        greedy_trials=100,
        metric_trials=200,
        level_seeds=5,
        antichain_replicas=300,
        sampler_replicas=500,
        coincidence_seeds=5,
        probes=2_000,
        ess_inf_samples=20,
    ),
    Suite.FULL: SuiteSize(
        sandwich_trials=1_000,
        greedy_trials=500,
        metric_trials=1_000,
        level_seeds=20,
        antichain_replicas=10_000,
        sampler_replicas=2_000,
        coincidence_seeds=20,
        probes=10_000,
        ess_inf_samples=50,
    ),
}


@dataclass(frozen=True, slots=True)
class Context:
    seed: int
    size: SuiteSize
    threads: int

    def rng(self, label: str) -> np.random.Generator:
        return np.random.default_rng(
            addressing.replica_seed(self.seed, 0, "verify", label)
        )

    def seed_for(self, label: str, index: int = 0) -> int:
        return addressing.replica_seed(self.seed, index, "verify", label)


type CheckFn = Callable[[Context], CheckResult]


@dataclass(frozen=True, slots=True)
class Check:
    name: str
    run: CheckFn


def _result(
    name: str,
    *,
    passed: bool,
    tolerance: str,
    **measured: float | int | str | None,
) -> CheckResult:
    return CheckResult(
        name=name, passed=passed, measured=measured, tolerance=tolerance
    )


def _scales(r_max: float, r_min: float, per_decade: int = 4) -> list[float]:
    return geometry.dyadic_scales(r_max, r_min, per_decade)


def check_alpha_cantor(ctx: Context) -> CheckResult:  # noqa: ARG001
    solution = dimension.solve_alpha(
        dimension.curve_for_model(models.cantor(1.0 / 3.0, 2))
    )
    error = abs(solution.alpha - LOG2_LOG3)
    return _result(
        "alpha_cantor",
        passed=error <= 1e-9,
        tolerance="|alpha - log2/log3| <= 1e-9",
        alpha=solution.alpha,
        error=error,
    )


def check_orbit_set(ctx: Context) -> CheckResult:  # noqa: ARG001
    scales = _scales(1e-2, 1e-6)
    measured: dict[str, float] = {}
    passed = True
    for p in (1.0, 2.0, 3.0):
        points = models.orbit_set(p, 1e-7)
        estimate = dimension.estimate_box_dimension(
            geometry.count_table(points, scales), (1e-6, 1e-2)
        )
        measured[f"slope_p{p:g}"] = estimate.slope
        passed &= abs(estimate.slope - 1.0 / (p + 1.0)) <= 0.03
    return _result(
        "orbit_set_dimension",
        passed=passed,
        tolerance="|slope - 1/(p+1)| <= 0.03",
        **measured,
    )


def check_example1(ctx: Context) -> CheckResult:
    measured: dict[str, float] = {}
    curve = dimension.curve_for_model(models.example1())
    quarter = dimension.expected_sum_ratios(curve, 0.25)
    alpha = dimension.solve_alpha(curve).alpha
    measured["sum_at_quarter_upper"] = quarter.upper
    measured["alpha"] = alpha
    passed = quarter.upper < 1.0 and alpha < 0.25

    orbit_scales = _scales(1e-2, 1e-6)
    union_scales = _scales(1e-3, 1e-6)
    for p in (1.0, 1.5, 2.0):
        target = 1.0 / (p + 1.0)
        rz = construction.sample_realization(
            models.example1(p),
            ctx.seed_for("example1"),
            3,
            1e-6,
            point_resolution=1e-7,
        )
        gamma = dimension.estimate_orbit_dimension(
            rz, (), 1.0, orbit_scales
        ).slope
        mink = dimension.eval_mink(alpha, gamma)
        union = construction.level_union(rz, 3, survivors_only=True)
        direct = dimension.estimate_box_dimension(
            geometry.count_table(union, union_scales), (1e-6, 1e-3)
        ).slope
        measured[f"mink_p{p:g}"] = mink
        measured[f"direct_p{p:g}"] = direct
        passed &= abs(mink - target) <= 0.05
        passed &= abs(direct - target) <= 0.08
    return _result(
        "example1",
        passed=passed,
        tolerance=(
            "alpha < 1/4 certified; |mink - 1/(p+1)| <= 0.05; "
            "|direct - 1/(p+1)| <= 0.08"
        ),
        **measured,
    )


def check_example2(ctx: Context) -> CheckResult:
    model = models.example2()
    curve = dimension.curve_for_model(model)
    eighth = dimension.expected_sum_ratios(curve, 0.125)
    alpha = dimension.solve_alpha(curve).alpha

    rz = construction.sample_realization(
        model, ctx.seed_for("example2"), 1, 1e-12
    )
    deep = dimension.estimate_orbit_dimension(
        rz, (1,), 1.0, _scales(1e-4, 1e-12)
    ).slope
    packing = dimension.eval_packsim(
        alpha, deep, self_similar=dimension.packsim_applicable(model, 1)
    )
    packing_value = (
        packing if isinstance(packing, float) else math.nan
    )

    seeds = [
        ctx.seed_for("example2-ess-inf", i)
        for i in range(ctx.size.ess_inf_samples)
    ]
    ess_inf = dimension.example2_ess_inf(
        model, seeds, alpha, _scales(1e-2, 1e-6), threads=ctx.threads
    )
    passed = (
        eighth.upper < 1.0
        and abs(deep - 0.2) <= 0.03
        and abs(packing_value - 0.2) <= 0.03
        and abs(ess_inf.minimum - 1.0 / 3.0) <= 0.04
    )
    return _result(
        "example2",
        passed=passed,
        tolerance=(
            "sum V_n^(1/8) < 1 certified; |deep - 1/5| <= 0.03; "
            "|ess inf - 1/3| <= 0.04"
        ),
        sum_at_eighth_upper=eighth.upper,
        alpha=alpha,
        deep_orbit=deep,
        packing=packing_value,
        ess_inf=ess_inf.minimum,
        ess_inf_p=ess_inf.argmin_p,
    )


def _random_set(
    rng: np.random.Generator, max_intervals: int = 8
) -> geometry.MaybeEmpty:
    count = int(rng.integers(1, max_intervals + 1))
    ends = np.sort(rng.random((count, 2)), axis=1)
    return geometry.normalize(map(tuple, ends))


def _dyadic_radius(rng: np.random.Generator) -> float:
    return float(int(rng.integers(1, 256))) * 2.0 ** -int(rng.integers(8, 20))


def check_sandwich(ctx: Context) -> CheckResult:
    rng = ctx.rng("sandwich")
    violations = 0
    for _ in range(ctx.size.sandwich_trials):
        k_set = _random_set(rng)
        r = _dyadic_radius(rng)
        packing = geometry.packing_number(k_set, r)
        if not (
            geometry.covering_number(k_set, 2.0 * r)
            <= packing
            <= geometry.covering_number(k_set, r / 2.0)
        ):
            violations += 1
    return _result(
        "sandwich",
        passed=violations == 0,
        tolerance="zero violations of N_2r <= P_r <= N_r/2",
        trials=ctx.size.sandwich_trials,
        violations=violations,
    )


def _grid_set(rng: np.random.Generator) -> CompactSet:
    count = int(rng.integers(1, 9))
    ends = np.sort(rng.integers(0, _ENDPOINT_GRID + 1, (count, 2)), axis=1)
    k_set = geometry.normalize(
        (a / _ENDPOINT_GRID, b / _ENDPOINT_GRID) for a, b in ends
    )
    if not isinstance(k_set, CompactSet):
        msg = "grid sets are never empty"
        raise AssertionError(msg)
    return k_set


def exhaustive_covering_number(k_set: CompactSet, r: float) -> int:
    """Fewest closed r-balls covering ``k_set``, by trying every placement.

    Balls start on the 1/16 grid: any cover can be shifted right until
    each ball starts at a point of the set or at the end of the previous
    ball, and with grid endpoints and 2r a multiple of 1/16 those points
    lie on the grid.
    """
    starts = [i / _ENDPOINT_GRID for i in range(_ENDPOINT_GRID + 1)]
    for count in itertools.count(1):
        for chosen in itertools.combinations(starts, count):
            cover = geometry.normalize(
                (a, min(a + 2.0 * r, 1.0)) for a in chosen
            )
            if geometry.is_subset(k_set, cover):
                return count
    msg = "unreachable"
    raise AssertionError(msg)


def exhaustive_packing_number(k_set: CompactSet, r: float) -> int:
    """Most centers on the 1/1024 grid inside ``k_set`` more than 2r apart."""
    grid = np.arange(_CENTER_GRID + 1) / _CENTER_GRID
    candidates = grid[geometry.distance_to_set(grid, k_set) == 0.0]
    best = np.zeros(candidates.size + 1, dtype=np.int64)
    for i in range(candidates.size - 1, -1, -1):
        j = int(np.searchsorted(candidates, candidates[i] + 2.0 * r, "right"))
        best[i] = max(best[i + 1], 1 + best[j])
    return int(best[0])


def check_greedy_optimal(ctx: Context) -> CheckResult:
    rng = ctx.rng("greedy")
    mismatches = 0
    for _ in range(ctx.size.greedy_trials):
        k_set = _grid_set(rng)
        r = int(rng.integers(4, 9)) / 32.0
        if geometry.covering_number(
            k_set, r
        ) != exhaustive_covering_number(k_set, r) or geometry.packing_number(
            k_set, r
        ) != exhaustive_packing_number(k_set, r):
            mismatches += 1
    return _result(
        "greedy_vs_exhaustive",
        passed=mismatches == 0,
        tolerance="greedy equals exhaustive optimum in every trial",
        trials=ctx.size.greedy_trials,
        mismatches=mismatches,
    )


def _level_distances(
    rz: construction.Realization,
) -> list[tuple[float, float]]:
    """(d_H(level k, deepest level), bound) for every stored k."""
    deepest = construction.level_union(rz, rz.max_depth, survivors_only=True)
    survivors = rz.survivors
    sup_diam = [
        max(
            (n.diameter for n in rz.alive_at(k) if n.address in survivors),
            default=0.0,
        )
        for k in range(rz.max_depth + 1)
    ]
    return [
        (
            geometry.hausdorff_distance(
                construction.level_union(rz, k, survivors_only=True), deepest
            ),
            sup_diam[k] + sup_diam[-1],
        )
        for k in range(rz.max_depth + 1)
    ]


def check_hausdorff_metric(ctx: Context) -> CheckResult:
    rng = ctx.rng("metric")
    violations = 0
    for _ in range(ctx.size.metric_trials):
        a, b, c = (_random_set(rng) for _ in range(3))
        d_ab = geometry.hausdorff_distance(a, b)
        d_ba = geometry.hausdorff_distance(b, a)
        d_ac = geometry.hausdorff_distance(a, c)
        d_bc = geometry.hausdorff_distance(b, c)
        ok = (
            geometry.hausdorff_distance(a, a) == 0.0
            and d_ab == d_ba
            and d_ab >= 0.0
            and (d_ab > 0.0) == (a != b)
            and d_ac <= d_ab + d_bc + 1e-15
        )
        violations += not ok

    family_violations = 0
    for _ in range(ctx.size.metric_trials):
        family = [
            (_random_set(rng), _random_set(rng))
            for _ in range(int(rng.integers(1, 6)))
        ]
        union_distance = geometry.hausdorff_distance(
            geometry.union(lower for lower, _ in family),
            geometry.union(upper for _, upper in family),
        )
        pairwise = max(
            geometry.hausdorff_distance(lower, upper)
            for lower, upper in family
        )
        family_violations += union_distance > pairwise + 1e-15

    converged = {}
    for name, model, depth in (
        ("cantor", models.cantor(1.0 / 3.0, 2), 14),
        (
            "homogeneous",
            models.homogeneous_random(models.RatioLaw.uniform(0.2, 0.3), 2),
            13,
        ),
    ):
        rz = construction.sample_realization(
            model, ctx.seed_for("metric-" + name), depth, math.ulp(0.0)
        )
        distances = [d for d, _ in _level_distances(rz)[:-1]]
        converged[f"min_distance_{name}"] = min(distances)
    passed = (
        violations == 0
        and family_violations == 0
        and all(d < 1e-6 for d in converged.values())
    )
    return _result(
        "hausdorff_metric",
        passed=passed,
        tolerance=(
            "zero axiom violations; d_H of unions <= max pairwise d_H; "
            "d_H(level k, limit) < 1e-6"
        ),
        trials=ctx.size.metric_trials,
        violations=violations,
        family_violations=family_violations,
        **converged,
    )


def _built_in_realizations(
    ctx: Context, label: str, seeds: int
) -> list[construction.Realization]:
    families = (
        (models.cantor(1.0 / 3.0, 2), 6, 1e-12),
        (
            models.homogeneous_random(
                models.RatioLaw.uniform(0.2, 0.3), 2, keep_probability=0.9
            ),
            6,
            1e-12,
        ),
        (models.example1(), 3, 1e-6),
        (models.example2(), 3, 1e-9),
    )
    return [
        construction.sample_realization(
            model, ctx.seed_for(label, i), depth, eps
        )
        for model, depth, eps in families
        for i in range(seeds)
    ]


def check_level_convergence(ctx: Context) -> CheckResult:
    violations = 0
    checked = 0
    for rz in _built_in_realizations(ctx, "levels", ctx.size.level_seeds):
        if rz.extinct:
            continue
        for distance, bound in _level_distances(rz):
            checked += 1
            violations += distance > bound + 1e-15
    return _result(
        "level_convergence",
        passed=violations == 0,
        tolerance="d_H(level k, deepest) <= sup diam_k + sup diam_deepest",
        checked=checked,
        violations=violations,
    )


def check_antichain(ctx: Context) -> CheckResult:
    homogeneous = models.homogeneous_random(
        models.RatioLaw.uniform(0.2, 0.3), 2
    )
    homogeneous_alpha = dimension.solve_alpha(
        dimension.curve_for_model(homogeneous, seed=ctx.seed)
    ).alpha
    matrix = (
        ("cantor", models.cantor(1.0 / 3.0, 2), 0.7),
        ("homogeneous", homogeneous, homogeneous_alpha + 0.1),
        ("example1", models.example1(1.5), 0.35),
    )
    measured: dict[str, float] = {}
    passed = True
    for name, model, t in matrix:
        for q in (1, 2, 3):
            report = dimension.antichain_moment_test(
                model,
                t,
                q,
                ctx.size.antichain_replicas,
                ctx.seed_for("antichain-" + name, q),
                threads=ctx.threads,
            )
            measured[f"{name}_q{q}_mean"] = report.mean
            measured[f"{name}_q{q}_bound"] = report.bound
            passed &= report.passed
    return _result(
        "antichain_moment",
        passed=passed,
        tolerance="mean <= p^q/(1-p) + 3 stderr",
        **measured,
    )


def check_sampler_equivalence(ctx: Context) -> CheckResult:
    model = models.homogeneous_random(
        models.RatioLaw.uniform(0.2, 0.3), 2, keep_probability=0.8
    )
    samples = {
        semantics: replicas.sampler_statistic_distribution(
            model,
            replicas.Statistic.ALIVE,
            2,
            replicas=ctx.size.sampler_replicas,
            seed=ctx.seed_for("sampler"),
            semantics=semantics,
            paired=False,
            threads=ctx.threads,
        )
        for semantics in construction.Semantics
    }
    comparison = replicas.compare_samplers(
        samples[construction.Semantics.RECURSIVE],
        samples[construction.Semantics.FRACTAL],
    )
    return _result(
        "sampler_equivalence",
        passed=comparison.passed,
        tolerance="KS statistic below the 1% critical value",
        ks=comparison.statistic,
        critical=comparison.critical_value,
    )


def check_finite_coincidence(ctx: Context) -> CheckResult:
    scales = _scales(1e-1, 1e-6, 8)
    cantor = dimension.finite_coincidence_check(
        models.cantor(1.0 / 3.0, 2), ctx.seed_for("finite-cantor"), 12, scales
    )
    homogeneous = dimension.finite_coincidence_check(
        models.homogeneous_random(models.RatioLaw.uniform(0.2, 0.3), 2),
        ctx.seed_for("finite-homogeneous"),
        10,
        scales,
        seeds=ctx.size.coincidence_seeds,
        threads=ctx.threads,
    )
    return _result(
        "finite_coincidence",
        passed=cantor.passed and homogeneous.passed,
        tolerance="|mean slope - alpha| <= 0.05",
        cantor_slope=cantor.mean_slope,
        cantor_alpha=cantor.alpha,
        homogeneous_slope=homogeneous.mean_slope,
        homogeneous_alpha=homogeneous.alpha,
    )


def check_neighborhood(ctx: Context) -> CheckResult:
    rng = ctx.rng("neighborhood")
    realizations = [
        rz
        for rz in _built_in_realizations(ctx, "neighborhood", 1)
        if not rz.extinct
    ]
    worst = 0
    for _ in range(ctx.size.probes):
        rz = realizations[int(rng.integers(len(realizations)))]
        k = int(rng.integers(rz.max_depth + 1))
        z = float(rng.random())
        r = 10.0 ** float(rng.uniform(-6.0, 0.0))
        worst = max(
            worst, construction.neighborhood_bound_probe(rz, k, z, r)
        )
    return _result(
        "neighborhood_bound",
        passed=worst <= 6,
        tolerance="at most 6 cells of diameter >= r/2 meet B(z, r)",
        probes=ctx.size.probes,
        worst=worst,
    )


def check_determinism(ctx: Context) -> CheckResult:
    model = models.example1()
    first, second = (
        export.to_json(
            export.realization_export(
                construction.sample_realization(
                    model, ctx.seed_for("determinism"), 2, 1e-6
                )
            )
        )
        for _ in range(2)
    )
    homogeneous = models.homogeneous_random(
        models.RatioLaw.uniform(0.2, 0.3), 2, keep_probability=0.8
    )
    serial, parallel = (
        replicas.sampler_statistic_distribution(
            homogeneous,
            replicas.Statistic.DIAMETER_SUM,
            3,
            replicas=64,
            seed=ctx.seed_for("determinism"),
            semantics=construction.Semantics.RECURSIVE,
            threads=threads,
        )
        for threads in (1, 4)
    )
    same_json = first == second
    same_replicas = bool(np.array_equal(serial, parallel))
    return _result(
        "determinism",
        passed=same_json and same_replicas,
        tolerance="identical output on re-run and across thread counts",
        same_json=str(same_json),
        same_replicas=str(same_replicas),
    )


CHECKS: Final[tuple[Check, ...]] = (
    Check("alpha_cantor", check_alpha_cantor),
    Check("orbit_set_dimension", check_orbit_set),
    Check("example1", check_example1),
    Check("example2", check_example2),
    Check("sandwich", check_sandwich),
    Check("greedy_vs_exhaustive", check_greedy_optimal),
    Check("hausdorff_metric", check_hausdorff_metric),
    Check("level_convergence", check_level_convergence),
    Check("antichain_moment", check_antichain),
    Check("sampler_equivalence", check_sampler_equivalence),
    Check("finite_coincidence", check_finite_coincidence),
    Check("neighborhood_bound", check_neighborhood),
    Check("determinism", check_determinism),
)


def run_suite(
    suite: Suite,
    seed: int,
    *,
    threads: int = 1,
    checks: Sequence[Check] = CHECKS,
) -> VerifyReport:
    """Run the acceptance checks and collect their results.

    A check that raises is reported as failed with the error message.
    """
    ctx = Context(seed=seed, size=SUITE_SIZES[suite], threads=threads)
    results = []
    for check in checks:
        log = logger.bind(check=check.name, suite=suite.value)
        started = time.perf_counter()
        try:
            result = check.run(ctx)
        except Exception as e:
            log.exception("check raised")
            result = _result(
                check.name,
                passed=False,
                tolerance="no error",
                error=str(e),
            )
        log.info(
            "check finished",
            passed=result.passed,
            seconds=round(time.perf_counter() - started, 3),
        )
        results.append(result)
    return VerifyReport(
        suite=suite.value,
        seed=seed,
        passed=all(r.passed for r in results),
        checks=results,
    )
