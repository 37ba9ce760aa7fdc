"""Stable text renderings of results: sorted-key JSON and count-table CSV."""

import csv
import io
import json
import sys
from collections.abc import Sequence
from pathlib import Path

import structlog
from pydantic import BaseModel

from random_fractals import schemas
from random_fractals.construction import Realization
from random_fractals.geometry import CountRow

logger = structlog.get_logger()

CSV_HEADER = ("r", "N_r", "P_r")


def realization_export(rz: Realization) -> schemas.RealizationExport:
    return schemas.RealizationExport.from_realization(rz)


def to_json(document: BaseModel) -> str:
    """Two-space indented JSON with sorted keys and repr-exact floats."""
    payload = document.model_dump(mode="json")
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _write(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("wrote file", path=str(path), size=len(text))


def write_json(document: BaseModel, path: Path | None = None) -> None:
    """Write a document to ``path``, or to stdout when it is None."""
    _write(to_json(document), path)


def count_table_csv(rows: Sequence[CountRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow((repr(row.r), row.covering, row.packing))
    return buffer.getvalue()


def write_count_table_csv(
    rows: Sequence[CountRow], path: Path | None = None
) -> None:
    _write(count_table_csv(rows), path)


def read_count_table_csv(text: str) -> list[CountRow]:
    """Parse CSV written by `count_table_csv`.

    Raises:
        ValueError: If the header is not ``r,N_r,P_r``.
    """
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        msg = f"expected CSV header {','.join(CSV_HEADER)}, got {header!r}"
        raise ValueError(msg)
    return [
        CountRow(r=float(r), covering=int(n), packing=int(p))
        for r, n, p in reader
    ]
