"""Instances and thread state."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

from codeflow.cft import ENTRY_EXPORT, Module, validate_module
from codeflow.cft import opcodes as ops
from codeflow.engine.host import HOST_REGISTRY, HostEnv, HostState
from codeflow.engine.memory import PAGES_PER_WASM_PAGE, AccessRecord, AccessStats, LinearMemory, Placement
from codeflow.enums import DeviceClass, TrapKind
from codeflow.errors import ConfigError, ImportNotSatisfied, ModuleRejected, NoSchedulableDevice, PlacementIncomplete
from codeflow.topology import Topology, access_cost, schedulable_devices

logger = logging.getLogger(__name__)


class ThreadStatus(str, Enum):
    RUNNABLE = "runnable"
    BLOCKED = "blocked"
    FINISHED = "finished"
    TRAPPED = "trapped"


@dataclass
class Label:
    target: int        # pc to continue at after a branch
    arity: int         # values carried by a branch
    height: int        # value stack height at block entry
    is_loop: bool


@dataclass
class Frame:
    func_idx: int
    locals: list[int]
    height: int
    arity: int
    pc: int = 0
    labels: list[Label] = field(default_factory=list)


@dataclass
class ThreadState:
    tid: int
    entry: int
    arg: int
    device: str
    status: ThreadStatus = ThreadStatus.RUNNABLE
    stack: list[int] = field(default_factory=list)
    frames: list[Frame] = field(default_factory=list)
    result: Optional[int] = None
    join_target: Optional[int] = None
    killed: bool = False
    started: bool = False
    instructions: int = 0
    start_ns: float = 0.0
    end_ns: Optional[float] = None
    clock_ns: float = 0.0
    compute_ns: float = 0.0
    memory_stall_ns: float = 0.0
    compile_ns: float = 0.0
    join_wait_ns: float = 0.0

    @property
    def finished(self) -> bool:
        return self.status == ThreadStatus.FINISHED

    def block_on(self, tid: int):
        self.status = ThreadStatus.BLOCKED
        self.join_target = tid

    def finish(self, result: Optional[int]):
        self.status = ThreadStatus.FINISHED
        self.result = result
        self.end_ns = self.clock_ns
        self.frames.clear()
        self.stack.clear()


@dataclass(frozen=True)
class BlockTable:
    """Matching end (and else) index for every block start in one body."""

    ends: dict[int, int]
    elses: dict[int, int]


def build_block_table(body) -> BlockTable:
    ends, elses = {}, {}
    open_blocks = []
    for i, instr in enumerate(body):
        if instr.op in ops.BLOCK_STARTS:
            open_blocks.append(i)
        elif instr.op == "else":
            elses[open_blocks[-1]] = i
        elif instr.op == "end":
            ends[open_blocks.pop()] = i
    return BlockTable(ends, elses)


class Instance:
    """A module bound to memory, a placement, host state and threads."""

    def __init__(self, m: Module, t: Topology, placement: Placement, env: HostEnv,
                 devices: Mapping[int, str], default_device: str, grow_region: str,
                 log_accesses: bool = False):
        self.module = m
        self.topology = t
        self.placement = placement
        mem = m.memory
        self.memory = LinearMemory(mem.min_pages, mem.max_pages)
        self.globals = [g.init for g in m.globals]
        self.host = HostState(env)
        self.devices = dict(devices)
        self.default_device = default_device
        self.grow_region = grow_region
        self.stats = AccessStats()
        self.access_log: Optional[list[AccessRecord]] = [] if log_accesses else None
        self.threads: list[ThreadState] = []
        self.exit_code: Optional[int] = None
        self.trap: Optional[tuple[int, TrapKind, str]] = None
        self.tables = {m.num_imports + i: build_block_table(f.body) for i, f in enumerate(m.functions)}
        self._costs: dict = {}

    # -------------------------------------------------------------------------
    # Threads
    # -------------------------------------------------------------------------

    def device_of(self, func_idx: int) -> str:
        return self.devices.get(func_idx, self.default_device)

    def spawn(self, entry: int, arg: int, parent: Optional[ThreadState] = None) -> ThreadState:
        clock = parent.clock_ns if parent is not None else 0.0
        thread = ThreadState(
            tid=len(self.threads), entry=entry, arg=arg, device=self.device_of(entry),
            start_ns=clock, clock_ns=clock,
        )
        func = self.module.func(entry)
        thread.frames.append(Frame(entry, [arg] + [0] * len(func.locals), 0, len(func.results)))
        self.threads.append(thread)
        if parent is not None:
            logger.debug(f"Thread {parent.tid} spawned thread {thread.tid} "
                         f"({self.module.func_name(entry)}) on {thread.device}")
        return thread

    def is_ready(self, tid: int) -> bool:
        thread = self.threads[tid]
        if thread.status == ThreadStatus.RUNNABLE:
            return True
        return thread.status == ThreadStatus.BLOCKED and self.threads[thread.join_target].finished

    def complete_join(self, thread: ThreadState, target: ThreadState) -> int:
        """Advance thread's clock to target's finish and return target's result."""
        wait = max(0.0, target.end_ns - thread.clock_ns)
        thread.clock_ns += wait
        thread.join_wait_ns += wait
        thread.status = ThreadStatus.RUNNABLE
        thread.join_target = None
        return (target.result or 0) & 0xFFFFFFFF

    def exit(self, thread: ThreadState, code: int):
        self.exit_code = code
        for other in self.threads:
            if other.status in (ThreadStatus.FINISHED, ThreadStatus.TRAPPED):
                continue
            if other is not thread:
                other.killed = True
            other.finish(code if other is thread else None)
        logger.debug(f"Thread {thread.tid} called proc_exit({code})")

    @property
    def done(self) -> bool:
        return self.trap is not None or all(t.finished for t in self.threads)

    # -------------------------------------------------------------------------
    # Cost lookups
    # -------------------------------------------------------------------------

    def compute_ns_per_instr(self, device_id: str) -> float:
        return self.topology.device(device_id).compute_ns_per_instr or 0.0

    def access_cost(self, device_id: str, region_id: str, kind, nbytes: int) -> float:
        key = (device_id, region_id, kind, nbytes)
        cost = self._costs.get(key)
        if cost is None:
            cost = access_cost(self.topology, device_id, region_id, kind, nbytes)
            self._costs[key] = cost
        return cost

    def grow_placement(self, wasm_pages: int) -> bool:
        """Place the pages of a memory.grow; False when the region is full."""
        needed = wasm_pages * PAGES_PER_WASM_PAGE
        if self.placement.free_pages(self.topology, self.grow_region) < needed:
            logger.warning(f"memory.grow of {wasm_pages} page(s) refused: region {self.grow_region} is full")
            return False
        self.placement.extend(needed, self.grow_region)
        return True


def default_device(t: Topology) -> str:
    """First schedulable cpu device by id."""
    for dev in schedulable_devices(t):
        if dev.device_class == DeviceClass.CPU:
            return dev.id
    raise NoSchedulableDevice("topology has no schedulable cpu device")


def instantiate(m: Module, t: Topology, placement: Placement, env: Optional[HostEnv] = None,
                devices: Optional[Mapping[int, str]] = None, grow_region: Optional[str] = None,
                log_accesses: bool = False) -> Instance:
    """Bind a validated module to a topology and create thread 0 for "main".

    devices maps entry function index -> device id; unmapped entries run on
    the first cpu device. Pages added by memory.grow go to grow_region
    (default: the region of page 0).

    Raises:
        ModuleRejected: the module has error-severity findings.
        ImportNotSatisfied: an import has no registered host function.
        PlacementIncomplete: a page of the initial memory has no region.
    """
    report = validate_module(m)
    if not report.ok:
        raise ModuleRejected(report)
    for imp in m.imports:
        if imp.key not in HOST_REGISTRY:
            raise ImportNotSatisfied(f"no host function for {imp.namespace}.{imp.name}")

    needed = m.memory.min_pages * PAGES_PER_WASM_PAGE
    if len(placement) < needed:
        raise PlacementIncomplete(f"placement covers {len(placement)} of {needed} pages")
    if len(placement) > needed:
        raise ConfigError(f"placement covers {len(placement)} pages but memory has {needed}")
    for region_id in set(placement.pages):
        t.region(region_id)
    for device_id in (devices or {}).values():
        t.device(device_id)

    inst = Instance(
        m, t, placement.copy(), env or HostEnv(), devices or {}, default_device(t),
        grow_region or placement.region_of(0), log_accesses,
    )
    inst.spawn(m.export(ENTRY_EXPORT), 0)
    logger.debug(f"Instantiated module: {m.num_funcs} functions, {inst.memory.pages} memory page(s)")
    return inst
