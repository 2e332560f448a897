"""CFT - the program text format.

A restricted S-expression dialect of the WebAssembly text format: one shared
memory, i32/i64 integers, atomics, host imports and a static thread table.
"""

from .ir import (
    WASM_PAGE_SIZE,
    AffinityHint,
    Export,
    FuncDef,
    FuncType,
    GlobalDef,
    Import,
    Instr,
    MemoryDecl,
    Module,
)
from .parser import ENTRY_EXPORT, parse_module
from .printer import print_module
from .validate import Finding, ValidationReport, validate_module

__all__ = [
    "WASM_PAGE_SIZE",
    "ENTRY_EXPORT",
    "AffinityHint",
    "Export",
    "Finding",
    "FuncDef",
    "FuncType",
    "GlobalDef",
    "Import",
    "Instr",
    "MemoryDecl",
    "Module",
    "ValidationReport",
    "parse_module",
    "print_module",
    "validate_module",
]
