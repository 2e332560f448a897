"""Module validation.

Findings are data: validate_module never raises. A finding with severity
"error" means the runtime must refuse the module. Function bodies are type
checked with the usual operand-stack algorithm (restricted to i32/i64), so
a module that passes can be interpreted without stack checks.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

from codeflow.cft import opcodes as ops
from codeflow.cft.ir import FuncType, Module
from codeflow.cft.parser import ENTRY_EXPORT

logger = logging.getLogger(__name__)

ERROR = "error"
WARNING = "warning"

MAX_PAGES = 65536
THREAD_ENTRY_TYPE = FuncType(("i32",), ("i32",))

# Polymorphic stack slot after unreachable/br/return
_UNKNOWN = "?"


@dataclass(frozen=True)
class Finding:
    rule: str
    severity: str
    message: str
    function: Optional[int] = None
    instr: Optional[int] = None

    @property
    def location(self) -> str:
        if self.function is None:
            return "module"
        if self.instr is None:
            return f"func {self.function}"
        return f"func {self.function} instr {self.instr}"

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "severity": self.severity,
            "location": self.location,
            "message": self.message,
        }


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == ERROR]

    @property
    def ok(self) -> bool:
        return not self.errors

    def rules(self) -> set[str]:
        return {f.rule for f in self.findings}

    def add(self, rule: str, message: str, severity: str = ERROR,
            function: Optional[int] = None, instr: Optional[int] = None):
        self.findings.append(Finding(rule, severity, message, function, instr))


class _BodyError(Exception):
    def __init__(self, rule: str, message: str):
        self.rule = rule
        self.message = message


@dataclass
class _Ctrl:
    op: str
    results: tuple[str, ...]
    height: int
    unreachable: bool = False
    saw_else: bool = False

    @property
    def label_types(self) -> tuple[str, ...]:
        # Branching to a loop re-enters it; loops take no parameters here
        return () if self.op == "loop" else self.results


class _BodyChecker:
    def __init__(self, m: Module, func_idx: int):
        self.m = m
        self.func = m.func(func_idx)
        self.local_types = self.func.params + self.func.locals
        self.stack: list[str] = []
        self.ctrls: list[_Ctrl] = []

    # -- operand stack --------------------------------------------------------

    def push(self, vtype: str):
        self.stack.append(vtype)

    def pop(self, expect: Optional[str] = None) -> str:
        ctrl = self.ctrls[-1]
        if len(self.stack) == ctrl.height:
            if ctrl.unreachable:
                return expect or _UNKNOWN
            raise _BodyError("STACK_UNDERFLOW", f"expected {expect or 'a value'} on the stack")
        actual = self.stack.pop()
        if expect and actual != _UNKNOWN and actual != expect:
            raise _BodyError("TYPE_MISMATCH", f"expected {expect}, found {actual}")
        return actual

    def pop_all(self, types: tuple[str, ...]):
        for vtype in reversed(types):
            self.pop(vtype)

    def mark_unreachable(self):
        ctrl = self.ctrls[-1]
        del self.stack[ctrl.height:]
        ctrl.unreachable = True

    def close(self, ctrl: _Ctrl):
        self.pop_all(ctrl.results)
        if len(self.stack) != ctrl.height:
            raise _BodyError("TYPE_MISMATCH", f"{len(self.stack) - ctrl.height} extra value(s) at end of {ctrl.op}")

    # -- checking -------------------------------------------------------------

    def check(self):
        self.ctrls.append(_Ctrl("func", self.func.results, 0))
        for i, instr in enumerate(self.func.body):
            try:
                self.step(instr)
            except _BodyError as e:
                e.instr = i
                raise
        if len(self.ctrls) != 1:
            raise _BodyError("UNBALANCED_BLOCK", f"{len(self.ctrls) - 1} unclosed block(s)")
        self.close(self.ctrls[0])

    def step(self, instr):
        op = instr.op
        if op in ops.CONSTS:
            self.push(ops.CONSTS[op])
        elif op in ops.BINOPS:
            vtype = ops.BINOPS[op]
            self.pop(vtype)
            self.pop(vtype)
            self.push(vtype)
        elif op in ops.COMPARES:
            self.pop("i32")
            self.pop("i32")
            self.push("i32")
        elif op in ops.TESTS:
            self.pop("i32")
            self.push("i32")
        elif op in ops.CONVERSIONS:
            src, dst = ops.CONVERSIONS[op]
            self.pop(src)
            self.push(dst)
        elif op in ops.LOADS:
            self.pop("i32")
            self.push(ops.LOADS[op][1])
        elif op in ops.STORES:
            self.pop(ops.STORES[op][1])
            self.pop("i32")
        elif op in ops.ATOMICS:
            self._atomic(op)
        elif op in ops.VARIABLES:
            self._variable(op, instr.arg(0))
        elif op == "memory.size":
            self.push("i32")
        elif op == "memory.grow":
            self.pop("i32")
            self.push("i32")
        elif op == "drop":
            self.pop()
        elif op == "select":
            self.pop("i32")
            first = self.pop()
            second = self.pop(None if first == _UNKNOWN else first)
            self.push(first if first != _UNKNOWN else second)
        else:
            self._control(op, instr)

    def _atomic(self, op: str):
        if op == "i32.atomic.load":
            self.pop("i32")
            self.push("i32")
        elif op == "i32.atomic.store":
            self.pop("i32")
            self.pop("i32")
        elif op == "i32.atomic.rmw.add":
            self.pop("i32")
            self.pop("i32")
            self.push("i32")
        else:  # cmpxchg: addr, expected, replacement
            self.pop("i32")
            self.pop("i32")
            self.pop("i32")
            self.push("i32")

    def _variable(self, op: str, idx: int):
        if op.startswith("local."):
            if not 0 <= idx < len(self.local_types):
                raise _BodyError("UNRESOLVED_LOCAL", f"local {idx} out of range ({len(self.local_types)} locals)")
            vtype = self.local_types[idx]
            if op == "local.get":
                self.push(vtype)
            elif op == "local.set":
                self.pop(vtype)
            else:
                self.pop(vtype)
                self.push(vtype)
            return
        if not 0 <= idx < len(self.m.globals):
            raise _BodyError("UNRESOLVED_GLOBAL", f"global {idx} out of range ({len(self.m.globals)} globals)")
        gdef = self.m.globals[idx]
        if op == "global.get":
            self.push(gdef.type)
        else:
            if not gdef.mutable:
                raise _BodyError("IMMUTABLE_GLOBAL", f"global {idx} is immutable")
            self.pop(gdef.type)

    def _control(self, op: str, instr):
        if op in ("block", "loop", "if"):
            if op == "if":
                self.pop("i32")
            result = instr.arg(0)
            self.ctrls.append(_Ctrl(op, (result,) if result else (), len(self.stack)))
        elif op == "else":
            ctrl = self.ctrls[-1]
            if ctrl.op != "if" or ctrl.saw_else:
                raise _BodyError("UNBALANCED_BLOCK", "else without matching if")
            self.close(ctrl)
            ctrl.saw_else = True
            ctrl.unreachable = False
        elif op == "end":
            if len(self.ctrls) == 1:
                raise _BodyError("UNBALANCED_BLOCK", "end without an open block")
            ctrl = self.ctrls[-1]
            if ctrl.op == "if" and not ctrl.saw_else and ctrl.results:
                raise _BodyError("TYPE_MISMATCH", "if with a result needs an else branch")
            self.close(ctrl)
            self.ctrls.pop()
            for vtype in ctrl.results:
                self.push(vtype)
        elif op in ("br", "br_if"):
            depth = instr.arg(0)
            if depth >= len(self.ctrls):
                raise _BodyError("BAD_BRANCH_DEPTH", f"branch depth {depth} exceeds nesting {len(self.ctrls) - 1}")
            target = self.ctrls[-1 - depth]
            if op == "br":
                self.pop_all(target.label_types)
                self.mark_unreachable()
            else:
                self.pop("i32")
                self.pop_all(target.label_types)
                for vtype in target.label_types:
                    self.push(vtype)
        elif op == "return":
            self.pop_all(self.func.results)
            self.mark_unreachable()
        elif op == "call":
            idx = instr.arg(0)
            if not self.m.has_func(idx):
                raise _BodyError("UNRESOLVED_CALL", f"call to undefined function {idx}")
            ftype = self.m.func_type(idx)
            self.pop_all(ftype.params)
            for vtype in ftype.results:
                self.push(vtype)
        elif op == "unreachable":
            self.mark_unreachable()
        elif op == "nop":
            pass
        else:
            raise _BodyError("UNKNOWN_OPCODE", f"opcode {op!r} outside the instruction set")


def _check_memory(m: Module, report: ValidationReport):
    if not m.memories:
        report.add("MISSING_MEMORY", "module declares no memory")
        return
    if len(m.memories) > 1:
        report.add("MULTI_MEMORY", f"module declares {len(m.memories)} memories; exactly one is allowed")
    mem = m.memories[0]
    if not mem.shared:
        report.add("MEMORY_NOT_SHARED", "memory must be declared shared")
    if mem.min_pages < 1 or mem.max_pages < mem.min_pages or mem.max_pages > MAX_PAGES:
        report.add("BAD_MEMORY_LIMITS",
                   f"memory limits min={mem.min_pages} max={mem.max_pages} "
                   f"(need 1 <= min <= max <= {MAX_PAGES})")


def _check_entries(m: Module, report: ValidationReport):
    for exp in m.exports:
        if not m.has_func(exp.func):
            report.add("UNRESOLVED_EXPORT", f"export {exp.name!r} names undefined function {exp.func}")
    entry = m.export(ENTRY_EXPORT)
    if entry is None:
        report.add("MISSING_MAIN", f'module has no "{ENTRY_EXPORT}" export')
    elif m.has_func(entry):
        if m.is_import(entry) or m.func_type(entry) != THREAD_ENTRY_TYPE:
            report.add("BAD_MAIN_SIGNATURE", f'"{ENTRY_EXPORT}" must be a defined (param i32) (result i32) function',
                       function=entry)
    for k, idx in enumerate(m.threads):
        if not m.has_func(idx):
            report.add("UNRESOLVED_THREAD", f"thread table entry {k} names undefined function {idx}")
        elif m.is_import(idx) or m.func_type(idx) != THREAD_ENTRY_TYPE:
            report.add("BAD_THREAD_SIGNATURE",
                       f"thread table entry {k} ({m.func_name(idx)}) must be (param i32) (result i32)",
                       function=idx)


def validate_module(m: Module) -> ValidationReport:
    """Check a parsed Module against every structural and typing rule."""
    report = ValidationReport()
    _check_memory(m, report)
    _check_entries(m, report)
    for i in range(len(m.functions)):
        idx = m.num_imports + i
        try:
            _BodyChecker(m, idx).check()
        except _BodyError as e:
            report.add(e.rule, e.message, function=idx, instr=getattr(e, "instr", None))
    for finding in report.findings:
        logger.debug(f"Validation {finding.severity}: {finding.rule} at {finding.location}: {finding.message}")
    return report
