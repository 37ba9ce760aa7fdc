import threading

import numpy as np
import pytest

from random_fractals import models, replicas
from random_fractals.construction import ModelSpec, Semantics
from random_fractals.replicas import Statistic


def test_run_replicas_keeps_index_order() -> None:
    assert replicas.run_replicas(lambda i: i * i, 5) == [0, 1, 4, 9, 16]


def test_run_replicas_threads_give_same_results() -> None:
    def body(index: int) -> float:
        return float(np.random.default_rng(index).random())

    assert replicas.run_replicas(body, 40, threads=4) == replicas.run_replicas(
        body, 40
    )


def test_run_replicas_uses_worker_threads() -> None:
    names = replicas.run_replicas(
        lambda _: threading.current_thread().name, 8, threads=3
    )
    assert threading.main_thread().name not in names


def test_run_replicas_zero_count() -> None:
    assert replicas.run_replicas(lambda i: i, 0, threads=2) == []


@pytest.mark.parametrize(("count", "threads"), [(-1, 1), (3, 0)])
def test_run_replicas_rejects_bad_arguments(count: int, threads: int) -> None:
    with pytest.raises(ValueError, match="must be"):
        replicas.run_replicas(lambda i: i, count, threads)


def test_statistics_of_cantor_levels(cantor_model: ModelSpec) -> None:
    values = replicas.sampler_statistic_distribution(
        cantor_model,
        Statistic.DIAMETER_SUM,
        3,
        replicas=3,
        seed=0,
        semantics=Semantics.RECURSIVE,
    )
    assert values.tolist() == pytest.approx([8 / 27] * 3)
    alive = replicas.sampler_statistic_distribution(
        cantor_model,
        Statistic.ALIVE,
        3,
        replicas=2,
        seed=0,
        semantics=Semantics.FRACTAL,
    )
    assert alive.tolist() == [8.0, 8.0]


def test_paired_samplers_agree_exactly(killing_model: ModelSpec) -> None:
    recursive, fractal = (
        replicas.sampler_statistic_distribution(
            killing_model,
            Statistic.ALIVE,
            2,
            replicas=30,
            seed=4,
            semantics=semantics,
            threads=2,
        )
        for semantics in (Semantics.RECURSIVE, Semantics.FRACTAL)
    )
    assert np.array_equal(recursive, fractal)


def test_unpaired_samplers_draw_independent_trees(
    killing_model: ModelSpec,
) -> None:
    recursive = replicas.sampler_statistic_distribution(
        killing_model,
        Statistic.MAX_DIAMETER,
        1,
        replicas=20,
        seed=4,
        semantics=Semantics.RECURSIVE,
    )
    fractal = replicas.sampler_statistic_distribution(
        killing_model,
        Statistic.MAX_DIAMETER,
        1,
        replicas=20,
        seed=4,
        semantics=Semantics.FRACTAL,
        paired=False,
    )
    assert not np.array_equal(recursive, fractal)


def test_compare_samplers_accepts_same_law() -> None:
    rng = np.random.default_rng(0)
    result = replicas.compare_samplers(
        rng.normal(size=500), rng.normal(size=500)
    )
    assert result.passed
    assert 0.0 < result.critical_value < 1.0


def test_compare_samplers_rejects_shifted_law() -> None:
    rng = np.random.default_rng(0)
    result = replicas.compare_samplers(
        rng.normal(size=500), rng.normal(loc=1.0, size=500)
    )
    assert not result.passed
    assert result.p_value < 0.01


def test_compare_samplers_needs_samples() -> None:
    with pytest.raises(ValueError, match="nonempty"):
        replicas.compare_samplers(np.array([]), np.array([1.0]))


@pytest.mark.slow
def test_recursive_and_fractal_laws_agree() -> None:
    model = models.homogeneous_random(
        models.RatioLaw.uniform(0.2, 0.3), 2, keep_probability=0.8
    )
    recursive, fractal = (
        replicas.sampler_statistic_distribution(
            model,
            Statistic.ALIVE,
            2,
            replicas=500,
            seed=1,
            semantics=semantics,
            paired=False,
            threads=4,
        )
        for semantics in (Semantics.RECURSIVE, Semantics.FRACTAL)
    )
    result = replicas.compare_samplers(recursive, fractal)
    assert result.passed
