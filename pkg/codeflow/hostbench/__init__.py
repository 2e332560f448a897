"""Hostbench - memory latency and bandwidth microbenchmarks on the real machine.

Modules:
    prng      - splitmix64
    chase     - Sattolo chains and dependent-load timing
    bandwidth - streaming-read bandwidth
    sweep     - size ladders, CSV/JSON output
    wasm      - the chase run inside the simulated runtime
"""

from codeflow.hostbench.bandwidth import BandwidthResult, measure_bandwidth
from codeflow.hostbench.chase import (
    CSV_COLUMNS,
    BenchRow,
    ChaseBuffer,
    build_chain,
    check_geometry,
    measure_chase,
    sattolo,
    walk,
)
from codeflow.hostbench.prng import SplitMix64, prng_next
from codeflow.hostbench.sweep import size_ladder, sweep, write_csv, write_json

__all__ = [
    "BandwidthResult",
    "measure_bandwidth",
    "CSV_COLUMNS",
    "BenchRow",
    "ChaseBuffer",
    "build_chain",
    "check_geometry",
    "measure_chase",
    "sattolo",
    "walk",
    "SplitMix64",
    "prng_next",
    "size_ladder",
    "sweep",
    "write_csv",
    "write_json",
]
