"""Replica loops over independent realizations.

Replicas run on worker threads under a capacity limiter and store their
results by index, so the output does not depend on the thread count.
"""

from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum
from typing import Final

import anyio
import anyio.to_thread
import numpy as np
import structlog
from scipy import stats

from random_fractals import addressing, construction
from random_fractals.construction import ModelSpec, Realization, Semantics

logger = structlog.get_logger()

# Progress is logged every this many finished replicas.
_PROGRESS_EVERY: Final = 1000


async def _run_one[T](
    fn: Callable[[int], T],
    index: int,
    limiter: anyio.CapacityLimiter,
    results: list[T | None],
) -> None:
    results[index] = await anyio.to_thread.run_sync(fn, index, limiter=limiter)
    if (index + 1) % _PROGRESS_EVERY == 0:
        logger.debug("replica finished", index=index)


async def _run_all[T](
    fn: Callable[[int], T], count: int, threads: int
) -> list[T]:
    limiter = anyio.CapacityLimiter(threads)
    results: list[T | None] = [None] * count
    async with anyio.create_task_group() as tg:
        for index in range(count):
            tg.start_soon(_run_one, fn, index, limiter, results)
    return results  # ty: ignore[invalid-return-type]


def run_replicas[T](
    fn: Callable[[int], T], count: int, threads: int = 1
) -> list[T]:
    """Evaluate ``fn(0), ..., fn(count - 1)`` on up to ``threads`` threads.

    Args:
        fn: Replica body; receives the replica index.
        count: Number of replicas.
        threads: Maximal number of replicas running at once.

    Returns:
        The results in index order.
    """
    if count < 0:
        msg = "count must be non-negative"
        raise ValueError(msg)
    if threads < 1:
        msg = "threads must be at least 1"
        raise ValueError(msg)
    if threads == 1:
        return [fn(index) for index in range(count)]
    return anyio.run(_run_all, fn, count, threads)


class Statistic(StrEnum):
    """Scalar summaries of a level of a realization."""

    ALIVE = "alive"
    DIAMETER_SUM = "diameter_sum"
    MAX_DIAMETER = "max_diameter"

    def evaluate(self, rz: Realization, level: int) -> float:
        cells = rz.alive_at(level)
        match self:
            case Statistic.ALIVE:
                return float(len(cells))
            case Statistic.DIAMETER_SUM:
                return float(np.sum([n.diameter for n in cells]))
            case Statistic.MAX_DIAMETER:
                return max((n.diameter for n in cells), default=0.0)


def sampler_statistic_distribution(
    model: ModelSpec,
    statistic: Statistic,
    level: int,
    *,
    replicas: int,
    seed: int,
    semantics: Semantics,
    eps_trunc: float = 1e-12,
    paired: bool = True,
    threads: int = 1,
) -> np.ndarray:
    """Values of ``statistic`` at ``level`` over independent realizations.

    Replica i uses the derived seed (seed, i). With ``paired`` off, the
    fractal semantics derives its seeds from a separate stream, so the two
    samplers share no randomness.
    """
    stream = "fractal" if not paired and semantics is Semantics.FRACTAL else ""

    def replica(index: int) -> float:
        rz = construction.sample_realization(
            model,
            addressing.replica_seed(seed, index, stream),
            level,
            eps_trunc,
            semantics,
        )
        return statistic.evaluate(rz, level)

    values = np.array(run_replicas(replica, replicas, threads))
    logger.info(
        "sampled statistic",
        model=model.name,
        statistic=statistic.value,
        semantics=semantics.value,
        replicas=replicas,
        mean=float(values.mean()) if values.size else None,
    )
    return values


@dataclass(frozen=True, slots=True)
class SamplerComparison:
    statistic: float
    critical_value: float
    p_value: float
    passed: bool


def compare_samplers(
    recursive: np.ndarray, fractal: np.ndarray, *, level: float = 0.01
) -> SamplerComparison:
    """Two-sample Kolmogorov-Smirnov comparison at significance ``level``.

    The critical value is the (1 - level) quantile of the Kolmogorov
    distribution at the effective sample size n * m / (n + m).
    """
    n, m = recursive.size, fractal.size
    if n == 0 or m == 0:
        msg = "both samples must be nonempty"
        raise ValueError(msg)
    result = stats.ks_2samp(recursive, fractal)
    effective = max(round(n * m / (n + m)), 1)
    critical = float(stats.kstwo.ppf(1.0 - level, effective))
    return SamplerComparison(
        statistic=float(result.statistic),
        critical_value=critical,
        p_value=float(result.pvalue),
        passed=float(result.statistic) < critical,
    )
