"""Module IR.

Immutable once built: every container is a tuple and every record a frozen
dataclass, so a Module can be shared read-only across threads. Identifiers
are already resolved - calls, locals and globals hold indices, branches hold
relative depths. The function index space puts imports first, then defined
functions, as in WebAssembly.
"""

from dataclasses import dataclass
from typing import Optional, Union

from codeflow.enums import DeviceClass

WASM_PAGE_SIZE = 65536

Immediate = Union[int, str, None]


@dataclass(frozen=True)
class FuncType:
    params: tuple[str, ...] = ()
    results: tuple[str, ...] = ()

    def __str__(self) -> str:
        params = " ".join(self.params)
        results = " ".join(self.results)
        return f"({params}) -> ({results})"


@dataclass(frozen=True)
class Instr:
    """One instruction: opcode plus resolved immediates.

    Immediates by shape: const -> (value,) stored unsigned; local/global/func
    -> (index,); label -> (depth,); memarg -> (offset,); blocktype ->
    (result type or None,).
    """

    op: str
    args: tuple[Immediate, ...] = ()

    def arg(self, i: int = 0) -> Immediate:
        return self.args[i]


@dataclass(frozen=True)
class MemoryDecl:
    shared: bool
    min_pages: int
    max_pages: int


@dataclass(frozen=True)
class Import:
    namespace: str
    name: str
    type: FuncType

    @property
    def key(self) -> tuple[str, str]:
        return (self.namespace, self.name)


@dataclass(frozen=True)
class AffinityHint:
    """Developer annotation: run this thread on a device of this class."""

    device_class: DeviceClass


@dataclass(frozen=True)
class FuncDef:
    name: Optional[str]
    params: tuple[str, ...] = ()
    results: tuple[str, ...] = ()
    locals: tuple[str, ...] = ()
    body: tuple[Instr, ...] = ()
    hint: Optional[AffinityHint] = None

    @property
    def type(self) -> FuncType:
        return FuncType(self.params, self.results)


@dataclass(frozen=True)
class GlobalDef:
    type: str
    mutable: bool
    init: int
    name: Optional[str] = None


@dataclass(frozen=True)
class Export:
    name: str
    func: int


@dataclass(frozen=True)
class Module:
    memories: tuple[MemoryDecl, ...] = ()
    imports: tuple[Import, ...] = ()
    functions: tuple[FuncDef, ...] = ()
    globals: tuple[GlobalDef, ...] = ()
    threads: tuple[int, ...] = ()
    exports: tuple[Export, ...] = ()
    entry: int = 0

    # -------------------------------------------------------------------------
    # Function index space
    # -------------------------------------------------------------------------

    @property
    def num_imports(self) -> int:
        return len(self.imports)

    @property
    def num_funcs(self) -> int:
        return len(self.imports) + len(self.functions)

    def has_func(self, idx: int) -> bool:
        return 0 <= idx < self.num_funcs

    def is_import(self, idx: int) -> bool:
        return 0 <= idx < len(self.imports)

    def func(self, idx: int) -> FuncDef:
        """Defined function at index (raises IndexError for imports)."""
        if idx < len(self.imports):
            raise IndexError(f"function {idx} is an import")
        return self.functions[idx - len(self.imports)]

    def func_type(self, idx: int) -> FuncType:
        if self.is_import(idx):
            return self.imports[idx].type
        return self.func(idx).type

    def func_name(self, idx: int) -> str:
        """Human-readable name for reports: $name, ns.name, or #index."""
        if self.is_import(idx):
            imp = self.imports[idx]
            return f"{imp.namespace}.{imp.name}"
        if self.has_func(idx):
            name = self.func(idx).name
            if name:
                return name
        return f"#{idx}"

    def export(self, name: str) -> Optional[int]:
        for exp in self.exports:
            if exp.name == name:
                return exp.func
        return None

    @property
    def memory(self) -> MemoryDecl:
        return self.memories[0]
