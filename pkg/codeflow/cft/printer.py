"""Canonical pretty-printer.

Two-space indent, one instruction per line, flat instruction syntax. Parsing
the output yields a structurally identical Module.
"""

from codeflow.cft import opcodes as ops
from codeflow.cft.ir import FuncDef, Instr, Module

INDENT = "  "


def _quote(text: str) -> str:
    out = []
    for ch in text:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\{ord(ch):02x}")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


def _func_ref(m: Module, idx: int) -> str:
    if m.has_func(idx) and not m.is_import(idx) and m.func(idx).name:
        return f"${m.func(idx).name}"
    return str(idx)


def _global_ref(m: Module, idx: int) -> str:
    if 0 <= idx < len(m.globals) and m.globals[idx].name:
        return f"${m.globals[idx].name}"
    return str(idx)


def _signature(params: tuple[str, ...], results: tuple[str, ...]) -> str:
    parts = []
    if params:
        parts.append(f"(param {' '.join(params)})")
    if results:
        parts.append(f"(result {' '.join(results)})")
    return " ".join(parts)


def format_instr(m: Module, instr: Instr) -> str:
    op = instr.op
    shape = ops.IMMEDIATES[op]
    if shape == ops.IMM_NONE:
        return op
    if shape == ops.IMM_BLOCKTYPE:
        result = instr.arg(0)
        return f"{op} (result {result})" if result else op
    if shape == ops.IMM_MEMARG:
        offset = instr.arg(0)
        return f"{op} offset={offset}" if offset else op
    if shape == ops.IMM_CONST:
        return f"{op} {instr.arg(0)}"
    if shape == ops.IMM_FUNC:
        return f"{op} {_func_ref(m, instr.arg(0))}"
    if shape == ops.IMM_GLOBAL:
        return f"{op} {_global_ref(m, instr.arg(0))}"
    return f"{op} {instr.arg(0)}"


def _print_func(m: Module, idx: int, func: FuncDef, lines: list[str]):
    head = ["(func"]
    if func.name:
        head.append(f"${func.name}")
    if func.hint is not None:
        head.append(f"(thread {func.hint.device_class.value})")
    sig = _signature(func.params, func.results)
    if sig:
        head.append(sig)
    if func.locals:
        head.append(f"(local {' '.join(func.locals)})")
    lines.append(INDENT + " ".join(head))
    depth = 2
    for instr in func.body:
        if instr.op in ("end", "else"):
            depth -= 1
        lines.append(INDENT * depth + format_instr(m, instr))
        if instr.op in ops.BLOCK_STARTS or instr.op == "else":
            depth += 1
    lines.append(INDENT + ")")


def print_module(m: Module) -> str:
    """Render a Module in canonical CFT form."""
    lines = ["(module"]
    for mem in m.memories:
        shared = " shared" if mem.shared else ""
        lines.append(f"{INDENT}(memory{shared} {mem.min_pages} {mem.max_pages})")
    for imp in m.imports:
        sig = _signature(imp.type.params, imp.type.results)
        desc = f"(func {sig})" if sig else "(func)"
        lines.append(f"{INDENT}(import {_quote(imp.namespace)} {_quote(imp.name)} {desc})")
    for gdef in m.globals:
        name = f" ${gdef.name}" if gdef.name else ""
        vtype = f"(mut {gdef.type})" if gdef.mutable else gdef.type
        lines.append(f"{INDENT}(global{name} {vtype} ({gdef.type}.const {gdef.init}))")
    for i, func in enumerate(m.functions):
        _print_func(m, m.num_imports + i, func, lines)
    if m.threads:
        refs = " ".join(_func_ref(m, idx) for idx in m.threads)
        lines.append(f"{INDENT}(threads {refs})")
    for exp in m.exports:
        lines.append(f"{INDENT}(export {_quote(exp.name)} (func {_func_ref(m, exp.func)}))")
    lines.append(")")
    return "\n".join(lines) + "\n"
