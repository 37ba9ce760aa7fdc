import math

import pytest
from scipy import optimize, stats
from structlog.testing import capture_logs

from random_fractals import construction, dimension, geometry, models
from random_fractals.config import ScaleGrid
from random_fractals.construction import Realization
from random_fractals.dimension import (
    CountType,
    CurveMode,
    EstimateMode,
    ExpectedSumCurve,
)
from random_fractals.geometry import CountRow

LOG2_LOG3 = math.log(2) / math.log(3)


def _power_law(count_base: int, ratio: float, levels: int) -> list[CountRow]:
    return [
        CountRow(r=ratio**k, covering=count_base**k, packing=count_base**k)
        for k in range(1, levels + 1)
    ]


def test_solve_alpha_cantor() -> None:
    curve = dimension.curve_for_model(models.cantor(1 / 3, 2))
    assert curve.mode is CurveMode.EXACT
    solution = dimension.solve_alpha(curve)
    assert solution.alpha == pytest.approx(LOG2_LOG3, abs=1e-8)
    assert solution.bracket[0] <= LOG2_LOG3 <= solution.bracket[1]
    assert solution.tail_bound_at_alpha == 0.0


def test_solve_alpha_logs_result() -> None:
    with capture_logs() as logs:
        dimension.solve_alpha(ExpectedSumCurve.from_ratios([0.25] * 3))
    assert logs[-1]["event"] == "solved alpha"
    assert logs[-1]["alpha"] == pytest.approx(math.log(3) / math.log(4))


def test_solve_alpha_degenerate_homogeneous() -> None:
    model = models.homogeneous_random(models.RatioLaw.degenerate(0.3), 3)
    solution = dimension.solve_alpha(dimension.curve_for_model(model))
    assert solution.alpha == pytest.approx(
        math.log(3) / math.log(1 / 0.3), abs=1e-8
    )


def test_solve_alpha_subcritical_raises() -> None:
    curve = dimension.curve_for_model(models.cantor(0.5, 1))
    with pytest.raises(dimension.SubcriticalModelError):
        dimension.solve_alpha(curve)


def test_solve_alpha_monte_carlo_brackets_the_root() -> None:
    model = models.homogeneous_random(models.RatioLaw.uniform(0.2, 0.3), 2)
    curve = dimension.curve_for_model(model, seed=3, samples=4000)
    assert curve.mode is CurveMode.MONTE_CARLO

    def expected(beta: float) -> float:
        # 2 * E[T^beta] for T uniform on [0.2, 0.3]
        return 2 * (0.3 ** (beta + 1) - 0.2 ** (beta + 1)) / (
            (beta + 1) * 0.1
        ) - 1.0

    truth = optimize.brentq(expected, 0.1, 0.9)
    solution = dimension.solve_alpha(curve)
    assert solution.mode is CurveMode.MONTE_CARLO
    assert solution.bracket[0] <= solution.alpha <= solution.bracket[1]
    assert solution.alpha == pytest.approx(truth, abs=0.01)


def test_solve_alpha_example1_is_certified() -> None:
    curve = dimension.curve_for_model(models.example1())
    solution = dimension.solve_alpha(curve)
    assert 0.0 < solution.alpha < 1.0
    at_alpha = dimension.expected_sum_ratios(curve, solution.alpha)
    assert at_alpha.lower <= 1.0 + 1e-6
    assert at_alpha.upper >= 1.0 - 1e-6


def test_expected_sum_ratios_rejects_non_positive_beta() -> None:
    curve = ExpectedSumCurve.from_ratios([0.5])
    with pytest.raises(ValueError, match="positive"):
        dimension.expected_sum_ratios(curve, 0.0)


def test_expected_sum_ratios_tail_bounds_the_series() -> None:
    curve = dimension.curve_for_model(models.example1(1.0))
    short = dimension.expected_sum_ratios(curve, 0.5, n_terms=4)
    long = dimension.expected_sum_ratios(curve, 0.5, n_terms=64)
    assert short.value <= long.value <= short.upper
    assert long.tail < short.tail


@pytest.mark.parametrize(
    "model",
    [
        models.cantor(1 / 3, 2),
        models.example1(1.0),
        models.homogeneous_random(models.RatioLaw.uniform(0.2, 0.3), 3),
    ],
    ids=["cantor", "example1", "homogeneous"],
)
def test_expected_sum_decreases_in_beta(model: construction.ModelSpec) -> None:
    curve = dimension.curve_for_model(model, samples=2_000)
    values = [
        dimension.expected_sum_ratios(curve, beta / 20).value
        for beta in range(1, 21)
    ]
    assert all(a > b for a, b in zip(values, values[1:], strict=False))


def test_from_ratios_rejects_values_outside_unit() -> None:
    with pytest.raises(ValueError, match="ratios"):
        ExpectedSumCurve.from_ratios([0.5, 1.0])


def test_box_dimension_of_exact_power_law() -> None:
    estimate = dimension.estimate_box_dimension(_power_law(2, 1 / 3, 10))
    assert estimate.slope == pytest.approx(LOG2_LOG3, abs=1e-9)
    assert estimate.r_squared == pytest.approx(1.0)
    assert not estimate.clamped
    lower = dimension.estimate_box_dimension(
        _power_law(2, 1 / 3, 10), mode=EstimateMode.LOWER
    )
    assert lower.slope == pytest.approx(LOG2_LOG3, abs=1e-9)


def test_box_dimension_accepts_pairs_and_packing_counts() -> None:
    pairs = [(3.0**-k, 2**k) for k in range(1, 8)]
    assert dimension.estimate_box_dimension(pairs).slope == pytest.approx(
        LOG2_LOG3, abs=1e-9
    )
    rows = [CountRow(r=3.0**-k, covering=1, packing=2**k) for k in range(1, 8)]
    estimate = dimension.estimate_box_dimension(
        rows, count_type=CountType.PACKING
    )
    assert estimate.slope == pytest.approx(LOG2_LOG3, abs=1e-9)
    assert estimate.count_type is CountType.PACKING


def test_box_dimension_of_constant_counts_is_zero() -> None:
    rows = [CountRow(r=10.0**-k, covering=5, packing=5) for k in range(1, 6)]
    estimate = dimension.estimate_box_dimension(rows)
    assert estimate.slope == 0.0
    assert estimate.points_used == 5


def test_box_dimension_clamps_to_unit_interval() -> None:
    with capture_logs() as logs:
        estimate = dimension.estimate_box_dimension(_power_law(4, 0.5, 8))
    assert estimate.slope == 1.0
    assert estimate.clamped
    assert any(log["event"] == "clamped slope" for log in logs)


def test_box_dimension_respects_fit_window() -> None:
    rows = _power_law(2, 0.5, 6) + [
        CountRow(r=2.0**-k, covering=64, packing=64) for k in range(7, 12)
    ]
    estimate = dimension.estimate_box_dimension(rows, (2.0**-6, 2.0**-1))
    assert estimate.slope == pytest.approx(1.0)
    assert estimate.fit_range == (2.0**-6, 0.5)
    assert estimate.points_used == 6


def test_box_dimension_envelopes_bracket_the_ordinary_fit() -> None:
    # staircase counts, far from a power law
    rows = [
        CountRow(r=2.0**-k, covering=4 ** (k // 3), packing=4 ** (k // 3))
        for k in range(1, 16)
    ]
    upper = dimension.estimate_box_dimension(rows, mode=EstimateMode.UPPER)
    lower = dimension.estimate_box_dimension(rows, mode=EstimateMode.LOWER)
    ordinary = stats.linregress(
        [k * math.log(2) for k in range(1, 16)],
        [(k // 3) * math.log(4) for k in range(1, 16)],
    ).slope
    assert upper.slope >= ordinary - 1e-12
    assert ordinary >= lower.slope - 1e-12


def test_box_dimension_of_deep_cantor_level() -> None:
    rz = construction.sample_realization(models.cantor(1 / 3, 2), 0, 12, 1e-12)
    union = construction.level_union(rz, 12, survivors_only=True)
    table = geometry.count_table(union, ScaleGrid().radii())
    window = dimension.select_fit_window(table, len(union))
    upper = dimension.estimate_box_dimension(table, window)
    lower = dimension.estimate_box_dimension(
        table, window, mode=EstimateMode.LOWER
    )
    assert upper.slope == pytest.approx(LOG2_LOG3, abs=0.02)
    assert lower.slope == pytest.approx(LOG2_LOG3, abs=0.02)
    assert upper.slope >= lower.slope


def test_box_dimension_needs_four_rows() -> None:
    with pytest.raises(dimension.InsufficientDataError):
        dimension.estimate_box_dimension(_power_law(2, 0.5, 3))


def test_box_dimension_rejects_zero_counts() -> None:
    rows = [CountRow(r=2.0**-k, covering=0, packing=0) for k in range(1, 6)]
    with pytest.raises(dimension.InsufficientDataError, match="positive"):
        dimension.estimate_box_dimension(rows)


def test_select_fit_window() -> None:
    rows = _power_law(2, 0.5, 8)
    # counts 2..256; only 16, 32 and 64 lie in [10, 100]
    with pytest.raises(dimension.InsufficientDataError):
        dimension.select_fit_window(rows, 200)
    window = dimension.select_fit_window(rows, 400)
    assert window == (2.0**-7, 2.0**-4)


def test_eval_functions() -> None:
    assert dimension.eval_mink(0.3, 0.5) == 0.5
    assert dimension.eval_mink_lower(0.3, 0.1) == 0.3
    assert dimension.eval_packsim(0.4, 0.2, self_similar=True) == 0.4
    assert (
        dimension.eval_packsim(0.4, 0.2, self_similar=False)
        is dimension.NOT_APPLICABLE
    )


def test_eval_mink_rejects_values_outside_unit() -> None:
    with pytest.raises(ValueError, match="alpha"):
        dimension.eval_mink(1.2, 0.0)


def test_packsim_applicable() -> None:
    assert dimension.packsim_applicable(models.cantor(1 / 3, 2), 0)
    assert not dimension.packsim_applicable(models.example2(), 0)
    assert dimension.packsim_applicable(models.example2(), 1)


_RELATIVE = [10.0**-k for k in range(1, 6)]


def test_orbit_dimension_of_finite_orbit_is_zero(
    cantor_realization: Realization,
) -> None:
    estimate = dimension.estimate_orbit_dimension(
        cantor_realization, (), 0.0, _RELATIVE
    )
    assert estimate.slope == 0.0
    assert not estimate.window_shrunk


def test_orbit_dimension_example1(example1_realization: Realization) -> None:
    scales = geometry.dyadic_scales(1e-2, 1e-6, 4)
    estimate = dimension.estimate_orbit_dimension(
        example1_realization, (), 1.0, scales
    )
    assert estimate.slope == pytest.approx(1 / 2.5, abs=0.05)


def test_orbit_dimension_of_dead_orbit_raises() -> None:
    model = models.homogeneous_random(
        models.RatioLaw.degenerate(0.3), 2, keep_probability=0.5
    )
    rz = next(
        rz
        for rz in (
            construction.sample_realization(model, seed, 1, 1e-9)
            for seed in range(100)
        )
        if rz.extinct
    )
    with pytest.raises(dimension.InsufficientDataError, match="too small"):
        dimension.estimate_orbit_dimension(rz, (), 0.0, _RELATIVE)
    dead = next(a for a, node in rz.nodes.items() if not node.alive)
    with pytest.raises(construction.EmptyCellError):
        dimension.estimate_orbit_dimension(rz, dead, 0.0, _RELATIVE)


def test_x_independence_on_finite_orbits(
    cantor_realization: Realization,
) -> None:
    report = dimension.x_independence_check(
        cantor_realization, (1,), 0.0, 0.5, _RELATIVE
    )
    assert report.ok
    assert report.difference == 0.0


def test_gamma_over_level_cap(cantor_realization: Realization) -> None:
    gamma = dimension.estimate_gamma_sup(cantor_realization, 1, 0.5, _RELATIVE)
    assert gamma.value == 0.0
    assert set(gamma.per_base) == {(), (1,), (2,)}
    lower = dimension.estimate_gamma_lower(
        cantor_realization, [(1, 2)], 0.5, _RELATIVE
    )
    assert lower.argmax == (1, 2)


def test_gamma_sup_example1(example1_realization: Realization) -> None:
    scales = geometry.dyadic_scales(1e-2, 1e-6, 4)
    gamma = dimension.estimate_gamma_sup(example1_realization, 0, 1.0, scales)
    assert gamma.argmax == ()
    assert gamma.value == pytest.approx(0.4, abs=0.05)


def test_orbit_constant_of_two_point_orbit(
    cantor_realization: Realization,
) -> None:
    constant = dimension.estimate_orbit_constant(
        cantor_realization, (), 0.0, 0.5, _RELATIVE
    )
    assert constant == pytest.approx(2 * 0.1**0.5)


def test_antichain_moment_test_cantor() -> None:
    report = dimension.antichain_moment_test(
        models.cantor(1 / 3, 2), 0.7, 2, 20, 5
    )
    p = 2 * 3.0**-0.7
    assert report.p == pytest.approx(p)
    assert report.bound == pytest.approx(p**2 / (1 - p))
    # every replica stops at the four cells of level 2
    assert report.mean == pytest.approx(4 * 9.0**-0.7)
    assert report.stderr == pytest.approx(0.0, abs=1e-12)
    assert report.passed


def test_antichain_level_rule() -> None:
    report = dimension.antichain_moment_test(
        models.cantor(1 / 3, 2),
        0.7,
        3,
        4,
        5,
        rule=dimension.AntichainRule.LEVEL,
    )
    assert report.mean == pytest.approx(8 * 27.0**-0.7)
    assert report.depth == 3


def test_antichain_bound_includes_the_series_tail() -> None:
    model = models.example1(1.5)
    evaluation = dimension.expected_sum_ratios(
        dimension.curve_for_model(model), 0.35
    )
    assert evaluation.tail > 0.0

    report = dimension.antichain_moment_test(model, 0.35, 1, 4, 0)

    assert report.p == evaluation.value + evaluation.tail
    assert report.bound == pytest.approx(report.p / (1 - report.p))


@pytest.mark.parametrize("t", [0.5, 0.64])
def test_antichain_rejects_t_near_alpha(t: float) -> None:
    with pytest.raises(dimension.HypothesisViolatedError):
        dimension.antichain_moment_test(models.cantor(1 / 3, 2), t, 1, 4, 0)


def test_finite_coincidence_not_applicable_to_infinite_branching() -> None:
    with pytest.raises(dimension.NotApplicableError):
        dimension.finite_coincidence_check(models.example1(), 0, 2, _RELATIVE)


@pytest.mark.slow
def test_finite_coincidence_cantor() -> None:
    report = dimension.finite_coincidence_check(
        models.cantor(1 / 3, 2), 0, 12, geometry.dyadic_scales(1e-1, 1e-6, 8)
    )
    assert report.passed
    assert report.alpha == pytest.approx(LOG2_LOG3, abs=1e-8)


@pytest.mark.slow
def test_example2_ess_inf_reports_each_seed() -> None:
    model = models.example2()
    scales = geometry.dyadic_scales(1e-2, 1e-6, 4)
    report = dimension.example2_ess_inf(model, [0, 1, 2], 0.1, scales)
    assert len(report.values) == 3
    assert report.minimum == min(value for _, value in report.values)
    assert 1.0 <= report.argmin_p <= 2.0
    for p, value in report.values:
        assert value == pytest.approx(max(0.1, 1 / (1 + p)), abs=0.05)


def test_example2_ess_inf_needs_seeds() -> None:
    with pytest.raises(ValueError, match="seed"):
        dimension.example2_ess_inf(models.example2(), [], 0.1, _RELATIVE)
