"""Pointer chase inside the runtime.

The same Sattolo chain is copied into simulated linear memory and walked by
the built-in `chase` program. Word 0 of memory holds the load count; the
chain starts at CHAIN_BASE. Slots hold slot indices, and the program reads
the low 32 bits of each.
"""

import logging
import time
from dataclasses import asdict, dataclass
from typing import Optional

from codeflow.errors import BenchPreconditionError
from codeflow.hostbench.chase import build_chain, walk
from codeflow.runtime import Runner, RunConfig, load_program, make_run_config
from codeflow.topology import Topology

logger = logging.getLogger(__name__)

CHASE_PROGRAM = "chase"
CHAIN_BASE = 64


@dataclass(frozen=True)
class WasmChaseResult:
    size_bytes: int
    stride_bytes: int
    loads: int
    region: str
    device: str
    modeled_ns_per_load: float
    memory_stall_ns_per_load: float
    host_ns_per_load: float
    final_index: int

    def to_dict(self) -> dict:
        return asdict(self)


def run_wasm_chase(t: Topology, size_bytes: int, stride_bytes: int, loads: int, seed: int = 0,
                   region: Optional[str] = None, cfg: Optional[RunConfig] = None) -> WasmChaseResult:
    """Walk a chain of size_bytes inside the simulator and report per-load costs.

    Raises:
        BenchPreconditionError: the chain does not fit the program's memory, or loads < 1.
    """
    if loads < 1:
        raise BenchPreconditionError(f"loads must be at least 1, got {loads}")
    buf = build_chain(size_bytes, stride_bytes, seed)
    m = load_program(CHASE_PROGRAM)
    if cfg is None:
        cfg = make_run_config(initial_placement=region)
    runner = Runner(m, t, cfg)
    memory = runner.inst.memory
    if CHAIN_BASE + size_bytes > len(memory):
        raise BenchPreconditionError(
            f"chain of {size_bytes} bytes does not fit {len(memory)} bytes of simulated memory")
    memory.store(0, 4, loads)
    memory.data[CHAIN_BASE:CHAIN_BASE + size_bytes] = buf.slots.tobytes()

    t0 = time.perf_counter_ns()
    report = runner.run()
    elapsed = time.perf_counter_ns() - t0

    main = report.threads[0]
    expected = walk(buf, loads)
    if main.result != expected:
        logger.warning(f"In-runtime chase ended at slot {main.result}, host walk at {expected}")
    return WasmChaseResult(
        size_bytes=size_bytes, stride_bytes=stride_bytes, loads=loads,
        region=runner.placement.region_of(0), device=main.device,
        modeled_ns_per_load=(main.compute_ns + main.memory_stall_ns) / loads,
        memory_stall_ns_per_load=main.memory_stall_ns / loads,
        host_ns_per_load=elapsed / loads,
        final_index=main.result or 0,
    )
