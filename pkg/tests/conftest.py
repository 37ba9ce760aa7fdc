from collections.abc import Iterator

import pytest
import structlog

from random_fractals import construction, models
from random_fractals.construction import ModelSpec, Realization


@pytest.fixture(autouse=True)
def _reset_structlog() -> Iterator[None]:
    """Restore structlog defaults so config does not leak across tests."""
    yield
    structlog.reset_defaults()


@pytest.fixture
def cantor_model() -> ModelSpec:
    return models.cantor(1.0 / 3.0, 2)


@pytest.fixture
def homogeneous_model() -> ModelSpec:
    return models.homogeneous_random(models.RatioLaw.uniform(0.2, 0.3), 2)


@pytest.fixture
def killing_model() -> ModelSpec:
    return models.homogeneous_random(
        models.RatioLaw.uniform(0.2, 0.3), 2, keep_probability=0.6
    )


@pytest.fixture
def cantor_realization(cantor_model: ModelSpec) -> Realization:
    return construction.sample_realization(cantor_model, 7, 4, 1e-12)


@pytest.fixture
def example1_realization() -> Realization:
    return construction.sample_realization(
        models.example1(1.5), 11, 2, 1e-6, point_resolution=1e-7
    )
