"""Size ladders and result files."""

import csv
import json
import logging
from typing import IO, Iterable, Optional

from codeflow.errors import BenchPreconditionError
from codeflow.hostbench.chase import CSV_COLUMNS, BenchRow, build_chain, measure_chase

logger = logging.getLogger(__name__)


def size_ladder(min_bytes: int, max_bytes: int, factor: float) -> list[int]:
    """Geometric sizes from min_bytes up to and including max_bytes."""
    if min_bytes <= 0 or min_bytes > max_bytes:
        raise BenchPreconditionError(f"need 0 < min <= max, got min={min_bytes} max={max_bytes}")
    if factor <= 1:
        raise BenchPreconditionError(f"factor must be greater than 1, got {factor}")
    sizes = []
    size = min_bytes
    while size <= max_bytes:
        sizes.append(size)
        size = max(int(size * factor), size + 1)
    return sizes


def sweep(min_bytes: int, max_bytes: int, factor: float, stride: int, seed: int = 0,
          loads: Optional[int] = None, repeats: Optional[int] = None) -> list[BenchRow]:
    rows = []
    for size in size_ladder(min_bytes, max_bytes, factor):
        rows.append(measure_chase(build_chain(size, stride, seed), loads, repeats))
    logger.info(f"Sweep done: {len(rows)} sizes")
    return rows


def write_csv(rows: Iterable[BenchRow], out: IO[str]):
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.csv_row())


def write_json(rows: Iterable[BenchRow], out: IO[str]):
    json.dump([row.to_dict() for row in rows], out, indent=2)
    out.write("\n")
