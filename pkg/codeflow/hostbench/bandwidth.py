"""Streaming-read bandwidth benchmark."""

import logging
import time
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from codeflow.config import settings
from codeflow.errors import BenchPreconditionError
from codeflow.hostbench.prng import GOLDEN_GAMMA

logger = logging.getLogger(__name__)

MIN_SIZE = 1 << 20
# Each sample streams at least this much so small sets are not all call overhead
MIN_BYTES_PER_SAMPLE = 64 << 20


@dataclass(frozen=True)
class BandwidthResult:
    size_bytes: int
    repeats: int
    gbps: float
    checksum: int

    def to_dict(self) -> dict:
        return asdict(self)


def make_buffer(size_bytes: int) -> np.ndarray:
    words = np.arange(size_bytes // 8, dtype=np.uint64)
    return words * np.uint64(GOLDEN_GAMMA)


def measure_bandwidth(size_bytes: int, repeats: Optional[int] = None) -> BandwidthResult:
    """Sequential 8-byte reads XOR-folded into a checksum; best of repeats.

    Raises:
        BenchPreconditionError: size below 1 MiB or not a multiple of 8, repeats < 1.
    """
    if repeats is None:
        repeats = settings.bench_repeats
    if size_bytes < MIN_SIZE or size_bytes % 8:
        raise BenchPreconditionError(f"size {size_bytes} must be at least {MIN_SIZE} bytes and a multiple of 8")
    if repeats < 1:
        raise BenchPreconditionError(f"repeats must be at least 1, got {repeats}")

    buf = make_buffer(size_bytes)
    passes = -(-MIN_BYTES_PER_SAMPLE // size_bytes)
    checksum = np.bitwise_xor.reduce(buf)  # warmup
    best = None
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        for _ in range(passes):
            checksum = np.bitwise_xor.reduce(buf)
        elapsed = time.perf_counter_ns() - t0
        best = elapsed if best is None else min(best, elapsed)

    result = BandwidthResult(size_bytes, repeats, size_bytes * passes / max(best, 1), int(checksum))
    logger.info(f"Bandwidth {size_bytes} B: {result.gbps:.2f} GB/s")
    return result
