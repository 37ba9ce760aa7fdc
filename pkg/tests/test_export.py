import json
from pathlib import Path

import pytest

from random_fractals import dimension, export, geometry, schemas
from random_fractals.construction import Realization
from random_fractals.geometry import CountRow


def test_count_table_csv_layout() -> None:
    rows = [CountRow(r=0.1, covering=5, packing=5)]
    assert export.count_table_csv(rows) == "r,N_r,P_r\n0.1,5,5\n"


def test_count_table_csv_keeps_float_repr() -> None:
    unit = geometry.normalize([(0.0, 1.0)])
    assert isinstance(unit, geometry.CompactSet)
    rows = geometry.count_table(unit, geometry.dyadic_scales(1e-1, 1e-3, 4))
    assert export.read_count_table_csv(export.count_table_csv(rows)) == rows


def test_read_count_table_csv_rejects_wrong_header() -> None:
    with pytest.raises(ValueError, match="header"):
        export.read_count_table_csv("r,N\n0.1,5\n")


def test_write_count_table_csv_to_stdout(
    capsys: pytest.CaptureFixture[str],
) -> None:
    export.write_count_table_csv([CountRow(r=0.5, covering=1, packing=1)])
    assert capsys.readouterr().out == "r,N_r,P_r\n0.5,1,1\n"


def test_to_json_sorts_keys() -> None:
    solution = dimension.AlphaSolution(
        alpha=0.5,
        bracket=(0.4, 0.6),
        residual=0.0,
        tail_bound_at_alpha=0.0,
        mode=dimension.CurveMode.EXACT,
    )
    text = export.to_json(schemas.AlphaSolutionSchema.from_solution(solution))
    payload = json.loads(text)
    assert list(payload) == sorted(payload)
    assert payload["mode"] == "exact"
    assert text.endswith("}\n")


def test_write_json_creates_parent_directories(
    tmp_path: Path, cantor_realization: Realization
) -> None:
    path = tmp_path / "out" / "rz.json"
    export.write_json(export.realization_export(cantor_realization), path)
    payload = json.loads(path.read_text(encoding="utf-8"))
    assert payload["model"] == "cantor"
    assert payload["seed"] == 7
    assert len(payload["nodes"]) == 31
    assert payload["depth"] == 4
    assert payload["eps_trunc"] == 1e-12
    root = payload["nodes"][0]
    assert root["address"] == []
    assert (root["left"], root["right"], root["alive"]) == (0.0, 1.0, True)
    assert payload["nodes"][1]["address"] == [1]
    assert payload["nodes"][1]["right"] == pytest.approx(1 / 3)
    assert payload["stats"]["alive_per_level"] == [1, 2, 4, 8, 16]


def test_realization_export_is_reproducible(
    cantor_realization: Realization,
) -> None:
    first = export.to_json(export.realization_export(cantor_realization))
    second = export.to_json(export.realization_export(cantor_realization))
    assert first == second


def test_realization_export_records_truncation(
    example1_realization: Realization,
) -> None:
    exported = export.realization_export(example1_realization)
    assert exported.draws == {"p": 1.5}
    assert len(exported.stats.truncation) == 3
    assert exported.stats.truncation[0].omitted is None
    assert any(node.leaf for node in exported.nodes)


def test_realization_export_reads_back(
    example1_realization: Realization,
) -> None:
    text = export.to_json(export.realization_export(example1_realization))
    loaded = schemas.RealizationExport.model_validate_json(text)
    assert loaded.depth == example1_realization.max_depth
    by_address = {tuple(node.address): node for node in loaded.nodes}
    assert by_address.keys() == example1_realization.nodes.keys()
    for address, node in example1_realization.nodes.items():
        record = by_address[address]
        assert record.alive == node.alive
        if node.interval is None:
            assert (record.left, record.right) == (None, None)
        else:
            assert (record.left, record.right) == node.interval
