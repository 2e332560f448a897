"""The interpreter.

step_thread runs one thread for up to a quantum of instructions. All values
live on the stacks as unsigned integers (i32 in [0, 2^32), i64 in
[0, 2^64)); signed operations reinterpret on the fly. Structural markers
(`end`, `else`) are processed but not counted, so a quantum counts the same
instructions the static profile does.

Every load, store and atomic is charged access_cost(device, region of the
page holding its first byte, kind, width) and recorded in the instance's
AccessStats. Guest faults end the step as a trapped outcome.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from codeflow.cft import opcodes as ops
from codeflow.config import settings
from codeflow.engine.host import handle_host_call
from codeflow.engine.instance import Frame, Instance, Label, ThreadState, ThreadStatus
from codeflow.engine.memory import AccessRecord, GuestTrap
from codeflow.enums import AccessKind, TrapKind
from codeflow.topology import PAGE_SIZE

logger = logging.getLogger(__name__)

MASKS = {ops.I32: 0xFFFFFFFF, ops.I64: 0xFFFFFFFFFFFFFFFF}
BITS = {ops.I32: 32, ops.I64: 64}


class StepState(str, Enum):
    YIELDED = "yielded"
    BLOCKED = "blocked"
    FINISHED = "finished"
    TRAPPED = "trapped"


@dataclass(frozen=True)
class StepOutcome:
    executed: int
    state: StepState
    compute_ns: float
    memory_stall_ns: float
    trap: Optional[TrapKind] = None
    detail: str = ""


def _signed32(value: int) -> int:
    return value - (1 << 32) if value & 0x80000000 else value


def _binop(op: str, vtype: str, a: int, b: int) -> int:
    mask = MASKS[vtype]
    name = op[4:]
    if name == "add":
        return (a + b) & mask
    if name == "sub":
        return (a - b) & mask
    if name == "mul":
        return (a * b) & mask
    if name in ("div_u", "rem_u"):
        if b == 0:
            raise GuestTrap(TrapKind.DIV_BY_ZERO, op)
        return a // b if name == "div_u" else a % b
    if name == "and":
        return a & b
    if name == "or":
        return a | b
    if name == "xor":
        return a ^ b
    if name == "shl":
        return (a << (b % BITS[vtype])) & mask
    return a >> (b % BITS[vtype])  # shr_u


def _compare(op: str, a: int, b: int) -> int:
    if op == "i32.eq":
        result = a == b
    elif op == "i32.ne":
        result = a != b
    elif op == "i32.lt_u":
        result = a < b
    elif op == "i32.lt_s":
        result = _signed32(a) < _signed32(b)
    elif op == "i32.gt_u":
        result = a > b
    else:  # i32.ge_u
        result = a >= b
    return int(result)


class _Executor:
    def __init__(self, inst: Instance, thread: ThreadState):
        self.inst = inst
        self.thread = thread
        self.stack = thread.stack
        self.module = inst.module
        self.memory = inst.memory
        self.cpi = inst.compute_ns_per_instr(thread.device)
        self.suspended = False
        self.executed = 0

    # -------------------------------------------------------------------------
    # Memory access with cost accounting
    # -------------------------------------------------------------------------

    def _charge(self, addr: int, kind: AccessKind, width: int, extra_kind: Optional[AccessKind] = None):
        inst, thread = self.inst, self.thread
        page = addr // PAGE_SIZE
        region = inst.placement.region_of(page)
        cost = inst.access_cost(thread.device, region, kind, width)
        if extra_kind is not None:
            cost += inst.access_cost(thread.device, region, extra_kind, width)
        thread.memory_stall_ns += cost
        thread.clock_ns += cost
        inst.stats.record(page, thread.device)
        if inst.access_log is not None:
            inst.access_log.append(AccessRecord(thread.tid, page, region, kind, width, cost))

    def _address(self, instr, width: int, atomic: bool = False) -> int:
        addr = self.stack.pop() + instr.arg(0)
        self.memory.check(addr, width)
        if atomic and addr % width:
            raise GuestTrap(TrapKind.OOB_MEMORY, f"misaligned atomic access at {addr}")
        return addr

    def load(self, instr):
        width, _ = ops.LOADS[instr.op]
        addr = self._address(instr, width)
        self._charge(addr, AccessKind.READ, width)
        self.stack.append(self.memory.load(addr, width))

    def store(self, instr):
        width, _ = ops.STORES[instr.op]
        value = self.stack.pop()
        addr = self._address(instr, width)
        self._charge(addr, AccessKind.WRITE, width)
        self.memory.store(addr, width, value)

    def atomic(self, instr):
        op = instr.op
        stack = self.stack
        if op == "i32.atomic.load":
            addr = self._address(instr, 4, atomic=True)
            self._charge(addr, AccessKind.READ, 4)
            stack.append(self.memory.load(addr, 4))
        elif op == "i32.atomic.store":
            value = stack.pop()
            addr = self._address(instr, 4, atomic=True)
            self._charge(addr, AccessKind.WRITE, 4)
            self.memory.store(addr, 4, value)
        elif op == "i32.atomic.rmw.add":
            value = stack.pop()
            addr = self._address(instr, 4, atomic=True)
            self._charge(addr, AccessKind.WRITE, 4, extra_kind=AccessKind.READ)
            old = self.memory.load(addr, 4)
            self.memory.store(addr, 4, old + value)
            stack.append(old)
        else:  # cmpxchg
            replacement = stack.pop()
            expected = stack.pop()
            addr = self._address(instr, 4, atomic=True)
            self._charge(addr, AccessKind.WRITE, 4, extra_kind=AccessKind.READ)
            old = self.memory.load(addr, 4)
            if old == expected:
                self.memory.store(addr, 4, replacement)
            stack.append(old)

    # -------------------------------------------------------------------------
    # Control flow
    # -------------------------------------------------------------------------

    def _return(self):
        frame = self.thread.frames.pop()
        stack = self.stack
        values = stack[len(stack) - frame.arity:] if frame.arity else []
        del stack[frame.height:]
        stack.extend(values)
        if not self.thread.frames:
            self.thread.finish(values[0] if values else 0)
            self.suspended = True

    def _branch(self, frame: Frame, depth: int):
        if depth == len(frame.labels):
            self._return()
            return
        label = frame.labels[-1 - depth]
        stack = self.stack
        values = stack[len(stack) - label.arity:] if label.arity else []
        del stack[label.height:]
        stack.extend(values)
        if label.is_loop:
            del frame.labels[len(frame.labels) - depth:]
        else:
            del frame.labels[len(frame.labels) - 1 - depth:]
        frame.pc = label.target

    def _enter(self, frame: Frame, instr, start: int):
        table = self.inst.tables[frame.func_idx]
        result = instr.arg(0)
        if instr.op == "loop":
            frame.labels.append(Label(start + 1, 0, len(self.stack), True))
            return
        end = table.ends[start]
        if instr.op == "if" and not self.stack.pop():
            else_at = table.elses.get(start)
            if else_at is None:
                frame.pc = end + 1
                return
            frame.pc = else_at + 1
        frame.labels.append(Label(end + 1, 1 if result else 0, len(self.stack), False))

    def _call(self, func_idx: int):
        m = self.module
        stack = self.stack
        ftype = m.func_type(func_idx)
        nparams = len(ftype.params)
        args = stack[len(stack) - nparams:] if nparams else []
        del stack[len(stack) - nparams:]
        if m.is_import(func_idx):
            imp = m.imports[func_idx]
            results = handle_host_call(self.inst, self.thread.tid, imp.namespace, imp.name, args)
            if results is None:
                self.suspended = True
                return
            stack.extend(results)
            return
        if len(self.thread.frames) >= settings.max_call_depth:
            raise GuestTrap(TrapKind.STACK_EXHAUSTED, f"call depth exceeds {settings.max_call_depth}")
        func = m.func(func_idx)
        self.thread.frames.append(
            Frame(func_idx, list(args) + [0] * len(func.locals), len(stack), len(func.results))
        )

    def _resume_join(self):
        thread = self.thread
        if thread.join_target is None:
            return
        target = self.inst.threads[thread.join_target]
        self.stack.append(self.inst.complete_join(thread, target))

    # -------------------------------------------------------------------------
    # Main loop
    # -------------------------------------------------------------------------

    def run(self, quantum: int) -> int:
        thread = self.thread
        stack = self.stack
        inst = self.inst
        self._resume_join()
        while self.executed < quantum and not self.suspended:
            frame = thread.frames[-1]
            body = self.module.func(frame.func_idx).body
            if frame.pc >= len(body):
                self._return()
                continue
            instr = body[frame.pc]
            op = instr.op
            if op == "end":
                frame.labels.pop()
                frame.pc += 1
                continue
            if op == "else":
                # Reached the end of a taken then-branch
                frame.pc = frame.labels.pop().target
                continue

            start = frame.pc
            frame.pc += 1
            self.executed += 1
            thread.instructions += 1
            thread.compute_ns += self.cpi
            thread.clock_ns += self.cpi

            if op in ops.CONSTS:
                stack.append(instr.arg(0))
            elif op == "local.get":
                stack.append(frame.locals[instr.arg(0)])
            elif op == "local.set":
                frame.locals[instr.arg(0)] = stack.pop()
            elif op == "local.tee":
                frame.locals[instr.arg(0)] = stack[-1]
            elif op in ops.BINOPS:
                b = stack.pop()
                a = stack.pop()
                stack.append(_binop(op, ops.BINOPS[op], a, b))
            elif op in ops.COMPARES:
                b = stack.pop()
                a = stack.pop()
                stack.append(_compare(op, a, b))
            elif op == "i32.eqz":
                stack.append(int(stack.pop() == 0))
            elif op == "br_if":
                if stack.pop():
                    self._branch(frame, instr.arg(0))
            elif op == "br":
                self._branch(frame, instr.arg(0))
            elif op in ops.BLOCK_STARTS:
                self._enter(frame, instr, start)
            elif op in ops.LOADS:
                self.load(instr)
            elif op in ops.STORES:
                self.store(instr)
            elif op in ops.ATOMICS:
                self.atomic(instr)
            elif op == "call":
                self._call(instr.arg(0))
            elif op == "return":
                self._return()
            elif op == "global.get":
                stack.append(inst.globals[instr.arg(0)])
            elif op == "global.set":
                inst.globals[instr.arg(0)] = stack.pop()
            elif op == "i64.extend_i32_u":
                pass
            elif op == "i32.wrap_i64":
                stack.append(stack.pop() & 0xFFFFFFFF)
            elif op == "drop":
                stack.pop()
            elif op == "select":
                cond = stack.pop()
                second = stack.pop()
                first = stack.pop()
                stack.append(first if cond else second)
            elif op == "memory.size":
                stack.append(self.memory.pages)
            elif op == "memory.grow":
                stack.append(self._grow(stack.pop()))
            elif op == "unreachable":
                raise GuestTrap(TrapKind.UNREACHABLE, "unreachable executed")
            # nop falls through

            if len(stack) > settings.max_value_stack:
                raise GuestTrap(TrapKind.STACK_EXHAUSTED, f"value stack exceeds {settings.max_value_stack}")
        return self.executed

    def _grow(self, delta: int) -> int:
        if self.memory.pages + delta > self.memory.max_pages or not self.inst.grow_placement(delta):
            return 0xFFFFFFFF
        return self.memory.grow(delta)


def step_thread(inst: Instance, tid: int, quantum: int) -> StepOutcome:
    """Run thread tid for up to quantum counted instructions.

    The thread must be ready (runnable, or blocked on a thread that has
    finished). Traps are recorded on the instance and are terminal for it.
    """
    thread = inst.threads[tid]
    if not inst.is_ready(tid):
        raise ValueError(f"thread {tid} is not ready to run (status {thread.status.value})")
    compute_before = thread.compute_ns
    stall_before = thread.memory_stall_ns
    executor = _Executor(inst, thread)
    thread.started = True
    trap = None
    detail = ""
    try:
        executor.run(quantum)
    except GuestTrap as e:
        trap = e.kind
        detail = e.detail
    if trap is not None:
        thread.status = ThreadStatus.TRAPPED
        thread.end_ns = thread.clock_ns
        inst.trap = (tid, trap, detail)
        logger.error(f"Thread {tid} trapped: {trap.value} ({detail})")

    compute = thread.compute_ns - compute_before
    stall = thread.memory_stall_ns - stall_before
    if trap is not None:
        state = StepState.TRAPPED
    elif thread.finished:
        state = StepState.FINISHED
    elif thread.status == ThreadStatus.BLOCKED:
        state = StepState.BLOCKED
    else:
        state = StepState.YIELDED
    return StepOutcome(executor.executed, state, compute, stall, trap, detail)
