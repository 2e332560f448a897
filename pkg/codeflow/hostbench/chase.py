"""Pointer-chasing latency benchmark.

The buffer is an array of 8-byte slots. Slots at every stride_bytes hold
the index of the next participating slot; the successor map is a single
cycle built with Sattolo's shuffle, so a walk touches the whole working set
before repeating. Each timed load depends on the value the previous one
returned, which defeats prefetchers and out-of-order overlap.
"""

import logging
import time
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from codeflow.config import settings
from codeflow.errors import BadGeometry, BenchPreconditionError
from codeflow.hostbench.prng import SplitMix64

logger = logging.getLogger(__name__)

SLOT_BYTES = 8
CSV_COLUMNS = ("size_bytes", "stride_bytes", "loads", "repeats", "ns_per_load", "stddev_ns")


@dataclass
class ChaseBuffer:
    slots: np.ndarray      # uint64, one entry per 8-byte slot
    stride_bytes: int
    seed: int
    start: int = 0

    @property
    def size_bytes(self) -> int:
        return self.slots.size * SLOT_BYTES

    @property
    def n(self) -> int:
        return self.size_bytes // self.stride_bytes

    @property
    def step(self) -> int:
        """Slots between participating slots."""
        return self.stride_bytes // SLOT_BYTES


@dataclass(frozen=True)
class BenchRow:
    size_bytes: int
    stride_bytes: int
    loads: int
    repeats: int
    ns_per_load: float
    stddev_ns: float
    seed: int = 0
    final_index: int = 0

    def csv_row(self) -> list:
        return [getattr(self, col) for col in CSV_COLUMNS]

    def to_dict(self) -> dict:
        return asdict(self)


def check_geometry(size_bytes: int, stride_bytes: int) -> int:
    """Participating slot count; raises BadGeometry when the shape is invalid."""
    if stride_bytes < SLOT_BYTES or stride_bytes % SLOT_BYTES:
        raise BadGeometry(f"stride {stride_bytes} must be a multiple of {SLOT_BYTES} and at least {SLOT_BYTES}")
    if size_bytes <= 0 or size_bytes % stride_bytes:
        raise BadGeometry(f"size {size_bytes} must be a positive multiple of stride {stride_bytes}")
    n = size_bytes // stride_bytes
    if n < 2:
        raise BadGeometry(f"size {size_bytes} / stride {stride_bytes} gives {n} slot(s); at least 2 needed")
    return n


def sattolo(n: int, seed: int) -> list[int]:
    """Random cyclic permutation: following order[k] from any k visits all n."""
    rng = SplitMix64(seed)
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.next() % i
        order[i], order[j] = order[j], order[i]
    return order


def build_chain(size_bytes: int, stride_bytes: int, seed: int = 0) -> ChaseBuffer:
    n = check_geometry(size_bytes, stride_bytes)
    step = stride_bytes // SLOT_BYTES
    slots = np.zeros(size_bytes // SLOT_BYTES, dtype=np.uint64)
    order = np.asarray(sattolo(n, seed), dtype=np.uint64)
    slots[::step] = order * np.uint64(step)
    return ChaseBuffer(slots, stride_bytes, seed)


def walk(buf: ChaseBuffer, hops: int, start: Optional[int] = None) -> int:
    """Follow the chain for hops loads and return the final slot index."""
    view = memoryview(buf.slots).cast("B").cast("Q")
    idx = buf.start if start is None else start
    for _ in range(hops):
        idx = view[idx]
    return idx


def measure_chase(buf: ChaseBuffer, loads: Optional[int] = None, repeats: Optional[int] = None) -> BenchRow:
    """Time dependent loads over the chain; min of repeats is the headline.

    Raises:
        BenchPreconditionError: loads < n, or repeats < 1.
    """
    n = buf.n
    if loads is None:
        loads = max(settings.bench_loads, n)
    if repeats is None:
        repeats = settings.bench_repeats
    if loads < n:
        raise BenchPreconditionError(f"loads {loads} must cover one traversal of {n} slots")
    if repeats < 1:
        raise BenchPreconditionError(f"repeats must be at least 1, got {repeats}")

    view = memoryview(buf.slots).cast("B").cast("Q")
    idx = walk(buf, n)  # warmup
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        for _ in range(loads):
            idx = view[idx]
        samples.append((time.perf_counter_ns() - t0) / loads)

    row = BenchRow(
        size_bytes=buf.size_bytes, stride_bytes=buf.stride_bytes, loads=loads, repeats=repeats,
        ns_per_load=float(min(samples)), stddev_ns=float(np.std(samples)),
        seed=buf.seed, final_index=int(idx),
    )
    logger.info(f"Chase {row.size_bytes} B stride {row.stride_bytes}: {row.ns_per_load:.2f} ns/load")
    return row
