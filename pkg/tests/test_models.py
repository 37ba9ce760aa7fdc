import math
from collections.abc import Callable

import numpy as np
import pytest

from random_fractals import addressing, construction, geometry, models
from random_fractals.config import ModelConfig
from random_fractals.construction import Cutoff, NodeContext
from random_fractals.models import ModelName


def test_vn_example1_first_terms() -> None:
    # the infimum over p in [1, 2] sits at an endpoint
    assert models.vn_example1(1) == pytest.approx(1 / 32, rel=1e-12)
    assert models.vn_example1(2) == pytest.approx(
        (1 / 4 - 1 / 9) / 256, rel=1e-12
    )


def test_vn_example2_first_terms() -> None:
    assert models.vn_example2(1) == pytest.approx(1 / 2048, rel=1e-12)
    assert models.vn_example2(2) == pytest.approx(
        (1 / 16 - 1 / 81) / 1024**2, rel=1e-12
    )


@pytest.mark.parametrize("vn", [models.vn_example1, models.vn_example2])
def test_vn_rejects_zero(vn: Callable[[int], float]) -> None:
    with pytest.raises(models.ModelParameterError):
        vn(0)


@pytest.mark.parametrize(
    ("vn", "q"), [(models.vn_example1, 1 / 16), (models.vn_example2, 1 / 1024)]
)
def test_vn_is_positive_and_dominated(
    vn: Callable[[int], float], q: float
) -> None:
    for n in range(1, 80):
        value = vn(n)
        assert 0.0 < value <= 0.5 * q**n * (1 + 1e-12)
        assert value < 16.0**-n


@pytest.mark.parametrize(
    ("vn", "factor", "p_hi"),
    [(models.vn_example1, 16.0, 2.0), (models.vn_example2, 1024.0, 4.0)],
)
def test_vn_matches_a_fine_exponent_grid(
    vn: Callable[[int], float], factor: float, p_hi: float
) -> None:
    ps = np.linspace(1.0, p_hi, 100_001)
    for n in range(1, 6):
        gap = float(np.min(float(n) ** -ps - float(n + 1) ** -ps))
        expected = factor**-n * gap
        assert vn(n) <= expected * (1 + 1e-12)
        assert vn(n) == pytest.approx(expected, rel=1e-8)


@pytest.mark.parametrize("seed", range(3))
def test_example1_ratios_do_not_depend_on_p(seed: int) -> None:
    def diameters(p: float) -> list[float]:
        rz = construction.sample_realization(models.example1(p), seed, 2, 1e-9)
        return sorted(n.diameter for k in (1, 2) for n in rz.alive_at(k))

    reference = diameters(1.0)
    for p in (1.3, 2.0):
        assert diameters(p) == pytest.approx(reference, rel=1e-12)


def test_series_log_values_do_not_underflow() -> None:
    logs = models.EXAMPLE1_SERIES.log_values(np.array([400, 4000]))
    assert np.all(np.isfinite(logs))
    assert logs[1] < logs[0]


def test_series_tail_bound_covers_the_tail() -> None:
    series = models.EXAMPLE1_SERIES
    tail = math.fsum(models.vn_example1(n) for n in range(4, 60))
    assert tail <= series.tail_bound(3, 1.0)
    assert series.tail_bound(3, 1.0) == pytest.approx(
        0.5 * 16.0**-4 / (1 - 1 / 16)
    )


def test_series_last_at_least() -> None:
    series = models.EXAMPLE1_SERIES
    assert series.last_at_least(1e-6) == 3
    assert series.last_at_least(1.0) == 0
    assert series.last_at_least(math.inf) == 0


def test_resolved_count() -> None:
    # gaps 1/(n(n-1)) stay >= 0.1 up to n = 3
    assert models.resolved_count(1.0, 0.1) == 3
    assert models.resolved_count(1.0, 2.0) == 1
    assert models.resolved_count(1.0, 2.0, start=5) == 5


def test_resolved_count_rejects_zero_spacing() -> None:
    with pytest.raises(ValueError, match="positive"):
        models.resolved_count(1.0, 0.0)


def test_orbit_set_points() -> None:
    points = models.orbit_set(1.0, 0.1)
    assert points.lefts.tolist() == pytest.approx([1 / 3, 1 / 2, 1.0])


def test_orbit_set_rejects_bad_parameters() -> None:
    with pytest.raises(models.ModelParameterError):
        models.orbit_set(0.0, 0.1)


@pytest.mark.parametrize(("ratio", "arity"), [(0.5, 3), (0.3, 0), (1.0, 1)])
def test_cantor_rejects_bad_parameters(ratio: float, arity: int) -> None:
    with pytest.raises(models.ModelParameterError):
        models.cantor(ratio, arity)


def test_cantor_children_are_packed_to_the_ends() -> None:
    model = models.cantor(0.25, 3)
    batch = model.offspring(
        NodeContext(address=(), rng=addressing.node_rng(0, ()), globals={}),
        Cutoff(min_ratio=0.0),
    )
    images = [c.local.image for c in batch.children if c.local is not None]
    assert images == pytest.approx([(0.0, 0.25), (0.375, 0.625), (0.75, 1.0)])
    assert batch.omitted == 0


def test_ratio_law_samples_within_support() -> None:
    law = models.RatioLaw.uniform(0.2, 0.3)
    draws = law.sample(np.random.default_rng(0), 1000)
    assert np.all((draws >= 0.2) & (draws <= 0.3))
    assert models.RatioLaw.degenerate(0.4).sample(
        np.random.default_rng(0), 3
    ).tolist() == [0.4, 0.4, 0.4]


@pytest.mark.parametrize(("low", "high"), [(0.0, 0.3), (0.3, 0.2), (0.5, 1.0)])
def test_ratio_law_rejects_bad_support(low: float, high: float) -> None:
    with pytest.raises(models.ModelParameterError):
        models.RatioLaw.uniform(low, high)


def test_homogeneous_rejects_overlapping_children() -> None:
    with pytest.raises(models.ModelParameterError, match="OSC"):
        models.homogeneous_random(models.RatioLaw.uniform(0.2, 0.6), 2)


def test_homogeneous_rejects_bad_keep_probability() -> None:
    with pytest.raises(models.ModelParameterError):
        models.homogeneous_random(
            models.RatioLaw.degenerate(0.3), 2, keep_probability=0.0
        )


def test_homogeneous_exact_ratios_only_when_deterministic() -> None:
    fixed = models.homogeneous_random(models.RatioLaw.degenerate(0.3), 3)
    random = models.homogeneous_random(models.RatioLaw.uniform(0.2, 0.3), 3)
    logs = fixed.generator.log_ratios(10)
    assert logs is not None
    assert logs.tolist() == pytest.approx([math.log(0.3)] * 3)
    assert random.generator.log_ratios(10) is None
    assert fixed.flags.deterministic_ratios
    assert not random.flags.deterministic_ratios


def test_homogeneous_sample_ratios_drops_killed_children() -> None:
    model = models.homogeneous_random(
        models.RatioLaw.uniform(0.2, 0.3), 4, keep_probability=0.5
    )
    sizes = {
        model.generator.sample_ratios(np.random.default_rng(seed)).size
        for seed in range(50)
    }
    assert len(sizes) > 1
    assert sizes <= set(range(5))


def test_example_flags() -> None:
    assert models.example1(1.5).flags.self_similar
    assert not models.example1().flags.self_similar
    deep = models.example2().flags
    assert not deep.self_similar_below(0)
    assert deep.self_similar_below(1)
    assert deep.level_dependent


def test_example_rejects_p_outside_range() -> None:
    with pytest.raises(models.ModelParameterError):
        models.example1(2.5)


def test_example1_draws_p_once_per_realization() -> None:
    generator = models.example1().generator
    draws = [
        generator.draw_globals(addressing.realization_rng(seed))["p"]
        for seed in range(20)
    ]
    assert all(1.0 <= p <= 2.0 for p in draws)
    assert len(set(draws)) == 20
    assert models.example1(1.25).generator.draw_globals(
        addressing.realization_rng(0)
    ) == {"p": 1.25}


def test_example2_uses_deep_exponent_below_the_root() -> None:
    generator = models.example2(1.0).generator
    assert isinstance(generator, models.SeriesGenerator)
    globals_ = {"p": 1.0}
    root = NodeContext(
        address=(), rng=addressing.node_rng(0, ()), globals=globals_
    )
    deep = NodeContext(
        address=(1,), rng=addressing.node_rng(0, (1,)), globals=globals_
    )
    assert generator.exponent(root) == 1.0
    assert generator.exponent(deep) == 4.0


def test_series_sample_ratios_is_not_supported() -> None:
    with pytest.raises(NotImplementedError):
        models.example1().generator.sample_ratios(np.random.default_rng(0))


def test_build_model() -> None:
    assert models.build_model(ModelConfig()).name == "cantor"
    homogeneous = models.build_model(
        ModelConfig(name=ModelName.HOMOGENEOUS, ratio_low=0.2, ratio_high=0.3)
    )
    assert homogeneous.parameters["ratio_high"] == 0.3
    assert not homogeneous.flags.deterministic_ratios
    assert models.build_model(
        ModelConfig(name=ModelName.EXAMPLE2)
    ).flags.level_dependent


def test_build_model_rejects_orbit_set() -> None:
    with pytest.raises(models.ModelParameterError, match="not a construction"):
        models.build_model(ModelConfig(name=ModelName.ORBIT_SET, p=1.0))


def test_orbit_set_keeps_resolved_points() -> None:
    points = models.orbit_set(1.0, 1e-7)
    assert isinstance(points, geometry.CompactSet)
    # gaps 1/(n(n-1)) >= 1e-7 up to n = 3162
    assert len(points) == 3162
