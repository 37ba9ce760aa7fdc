import json
from pathlib import Path

import pytest

from random_fractals import config
from random_fractals.construction import Semantics
from random_fractals.models import ModelName


def _write(tmp_path: Path, payload: object) -> Path:
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def test_defaults() -> None:
    defaults = config.ExperimentConfig()
    assert defaults.model.name is ModelName.CANTOR
    assert defaults.semantics is Semantics.RECURSIVE
    assert defaults.scales.r_min < defaults.scales.r_max
    assert defaults.output is None


def test_load_config_reads_nested_fields(tmp_path: Path) -> None:
    path = _write(
        tmp_path,
        {
            "model": {
                "name": "homogeneous",
                "ratio_low": 0.2,
                "ratio_high": 0.3,
            },
            "seed": 12,
            "scales": {"r_min": 1e-5, "points_per_decade": 8},
            "semantics": "fractal",
        },
    )
    loaded = config.load_config(path)
    assert loaded.model.name is ModelName.HOMOGENEOUS
    assert loaded.model.ratio_high == 0.3
    assert loaded.seed == 12
    assert loaded.scales.points_per_decade == 8
    assert loaded.semantics is Semantics.FRACTAL


def test_load_config_missing_file(tmp_path: Path) -> None:
    with pytest.raises(config.ConfigError, match="cannot read"):
        config.load_config(tmp_path / "missing.json")


def test_load_config_rejects_unknown_fields(tmp_path: Path) -> None:
    path = _write(tmp_path, {"model": {"name": "cantor", "colour": "red"}})
    with pytest.raises(config.ConfigError, match=r"model\.colour"):
        config.load_config(path)


def test_load_config_rejects_bad_json(tmp_path: Path) -> None:
    path = tmp_path / "broken.json"
    path.write_text("{", encoding="utf-8")
    with pytest.raises(config.ConfigError, match="invalid configuration"):
        config.load_config(path)


def test_orbit_set_needs_exponent() -> None:
    with pytest.raises(config.ConfigError, match="exponent"):
        config.merge_overrides(
            config.ExperimentConfig(), {"name": ModelName.ORBIT_SET}
        )


def test_scale_grid_must_be_ordered() -> None:
    with pytest.raises(config.ConfigError, match="r_min"):
        config.merge_overrides(
            config.ExperimentConfig(), {"r_min": 1.0, "r_max": 0.1}
        )


def test_merge_overrides_routes_keys() -> None:
    merged = config.merge_overrides(
        config.ExperimentConfig(),
        {
            "name": "example1",
            "p": 1.5,
            "r_max": 1e-2,
            "max_depth": 5,
            "seed": None,
        },
    )
    assert merged.model.name is ModelName.EXAMPLE1
    assert merged.model.p == 1.5
    assert merged.scales.r_max == 1e-2
    assert merged.max_depth == 5
    assert merged.seed == 0


def test_merge_overrides_keeps_loaded_values(tmp_path: Path) -> None:
    loaded = config.load_config(_write(tmp_path, {"seed": 9, "threads": 2}))
    merged = config.merge_overrides(loaded, {"threads": 4})
    assert merged.seed == 9
    assert merged.threads == 4


def test_merge_overrides_rejects_unknown_key() -> None:
    with pytest.raises(config.ConfigError, match="unknown"):
        config.merge_overrides(config.ExperimentConfig(), {"depth": 3})


def test_scale_grid_radii_are_decreasing() -> None:
    radii = config.ScaleGrid(r_max=0.1, r_min=1e-3).radii()
    assert radii == sorted(radii, reverse=True)
    assert all(1e-3 <= r <= 0.1 for r in radii)
