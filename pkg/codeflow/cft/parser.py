"""Program text parser.

Builds a resolved Module from CFT source. Symbolic names ($f, $x, $label)
are resolved here; numeric indices are taken as written and bounds-checked
later by validate_module, so a module calling function 99 parses fine and
is reported as UNRESOLVED_CALL.

Both instruction syntaxes are accepted and may be mixed:

    flat:    i32.const 1  i32.const 2  i32.add   block $l ... end
    folded:  (i32.add (i32.const 1) (i32.const 2))   (if (then ...) (else ...))
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

from codeflow.cft import opcodes as ops
from codeflow.cft.ir import (
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
from codeflow.cft.reader import ID, KEYWORD, STRING, Atom, Node, SList, read
from codeflow.enums import DeviceClass
from codeflow.errors import (
    CftSyntaxError,
    DuplicateExport,
    MissingExport,
    UnknownImport,
    UnknownOpcode,
)

logger = logging.getLogger(__name__)

ENTRY_EXPORT = "main"


def _err(node: Node, message: str) -> CftSyntaxError:
    return CftSyntaxError(node.line, node.col, message)


def parse_int(atom: Node, lo: int, hi: int, what: str) -> int:
    """Parse a decimal or 0x-hex integer literal within [lo, hi]."""
    if not isinstance(atom, Atom) or atom.kind != KEYWORD:
        raise _err(atom, f"expected {what}")
    text = atom.value.replace("_", "")
    sign = 1
    if text and text[0] in "+-":
        sign = -1 if text[0] == "-" else 1
        text = text[1:]
    try:
        if text.lower().startswith("0x"):
            value = int(text[2:], 16)
        elif text.isdigit():
            value = int(text, 10)
        else:
            raise ValueError(text)
    except ValueError:
        raise _err(atom, f"expected {what}, got {atom.value!r}") from None
    value *= sign
    if not lo <= value <= hi:
        raise _err(atom, f"{what} {atom.value} out of range")
    return value


def _parse_valtype(node: Node) -> str:
    if isinstance(node, Atom) and node.kind == KEYWORD and node.value in ops.VALUE_TYPES:
        return node.value
    raise _err(node, "expected value type i32 or i64")


def _parse_string(node: Node, what: str) -> str:
    if isinstance(node, Atom) and node.kind == STRING:
        return node.value
    raise _err(node, f"expected {what} string")


# =============================================================================
# Function headers
# =============================================================================

@dataclass
class _Header:
    """Everything in a (func ...) before the first instruction."""

    name: Optional[str] = None
    hint: Optional[AffinityHint] = None
    exports: list[tuple[str, Node]] = field(default_factory=list)
    params: list[str] = field(default_factory=list)
    results: list[str] = field(default_factory=list)
    locals: list[str] = field(default_factory=list)
    local_names: dict[str, int] = field(default_factory=dict)
    body_start: int = 1


def _add_typed(items: tuple[Node, ...], target: list[str], header: _Header, named: bool):
    """Parse the inside of (param ...) / (local ...)."""
    if named and items and isinstance(items[0], Atom) and items[0].kind == ID:
        if len(items) != 2:
            raise _err(items[0], "a named param/local takes exactly one type")
        name = items[0].value
        if name in header.local_names:
            raise _err(items[0], f"duplicate local ${name}")
        header.local_names[name] = len(header.params) + len(header.locals)
        target.append(_parse_valtype(items[1]))
        return
    for item in items:
        target.append(_parse_valtype(item))


def _parse_func_header(form: SList, allow_body: bool) -> _Header:
    header = _Header()
    items = form.items
    i = 1
    if i < len(items) and isinstance(items[i], Atom) and items[i].kind == ID:
        header.name = items[i].value
        i += 1
    stage = 0  # thread/export -> param -> result -> local
    while i < len(items):
        node = items[i]
        if not isinstance(node, SList):
            break
        head = node.head
        if head == "thread" and stage == 0:
            if header.hint is not None or len(node.items) != 2:
                raise _err(node, "expected (thread <device-class>)")
            cls = node.items[1]
            try:
                header.hint = AffinityHint(DeviceClass(cls.value if isinstance(cls, Atom) else ""))
            except ValueError:
                raise _err(cls, "unknown device class in thread annotation") from None
        elif head == "export" and stage == 0:
            if len(node.items) != 2:
                raise _err(node, 'expected (export "name")')
            header.exports.append((_parse_string(node.items[1], "export name"), node))
        elif head == "param" and stage <= 1:
            stage = 1
            if header.locals:
                raise _err(node, "param after local")
            _add_typed(node.items[1:], header.params, header, named=True)
        elif head == "result" and stage <= 2:
            stage = 2
            for item in node.items[1:]:
                header.results.append(_parse_valtype(item))
            if len(header.results) > 1:
                raise _err(node, "at most one result")
        elif head == "local" and stage <= 3:
            stage = 3
            if not allow_body:
                raise _err(node, "locals are not allowed here")
            _add_typed(node.items[1:], header.locals, header, named=True)
        else:
            break
        i += 1
    header.body_start = i
    if not allow_body and i < len(items):
        raise _err(items[i], "unexpected item in function type")
    return header


# =============================================================================
# Bodies
# =============================================================================

class _BodyParser:
    """Parses one function body into a flat instruction list."""

    def __init__(self, names: "_Names", header: _Header):
        self.names = names
        self.header = header
        self.out: list[Instr] = []
        # One entry per open block: (label name or None, opcode, saw_else)
        self.blocks: list[list] = []

    def parse(self, items: tuple[Node, ...], form: SList) -> tuple[Instr, ...]:
        self._seq(items)
        if self.blocks:
            raise _err(form, f"unclosed {self.blocks[-1][1]} at end of function")
        return tuple(self.out)

    # -- immediates -----------------------------------------------------------

    def _resolve(self, atom: Node, table: dict[str, int], what: str) -> int:
        if isinstance(atom, Atom) and atom.kind == ID:
            if atom.value not in table:
                raise _err(atom, f"unknown {what} ${atom.value}")
            return table[atom.value]
        return parse_int(atom, 0, 0xFFFFFFFF, f"{what} index")

    def _label_depth(self, atom: Node) -> int:
        if isinstance(atom, Atom) and atom.kind == ID:
            for depth, block in enumerate(reversed(self.blocks)):
                if block[0] == atom.value:
                    return depth
            raise _err(atom, f"unknown label ${atom.value}")
        return parse_int(atom, 0, 0xFFFFFFFF, "label depth")

    def _immediates(self, op: str, at: Node, items: tuple[Node, ...], i: int) -> tuple[tuple, int]:
        """Consume immediates for op from items[i:]. Returns (args, next i)."""
        shape = ops.IMMEDIATES[op]
        if shape == ops.IMM_NONE:
            return (), i
        if shape == ops.IMM_MEMARG:
            offset = 0
            while i < len(items) and isinstance(items[i], Atom) and items[i].kind == KEYWORD:
                text = items[i].value
                if text.startswith("offset="):
                    offset = parse_int(Atom(KEYWORD, text[7:], items[i].line, items[i].col),
                                       0, 0xFFFFFFFF, "offset")
                elif text.startswith("align="):
                    align = parse_int(Atom(KEYWORD, text[6:], items[i].line, items[i].col),
                                      1, 8, "alignment")
                    if align & (align - 1):
                        raise _err(items[i], "alignment must be a power of two")
                else:
                    break
                i += 1
            return (offset,), i
        if i >= len(items) or not isinstance(items[i], Atom):
            raise _err(at, f"{op} expects an immediate")
        atom = items[i]
        if shape == ops.IMM_CONST:
            if op == "i32.const":
                value = parse_int(atom, -(1 << 31), (1 << 32) - 1, "i32 constant") & 0xFFFFFFFF
            else:
                value = parse_int(atom, -(1 << 63), (1 << 64) - 1, "i64 constant") & 0xFFFFFFFFFFFFFFFF
            return (value,), i + 1
        if shape == ops.IMM_LOCAL:
            return (self._resolve(atom, self.header.local_names, "local"),), i + 1
        if shape == ops.IMM_GLOBAL:
            return (self._resolve(atom, self.names.globals, "global"),), i + 1
        if shape == ops.IMM_FUNC:
            return (self._resolve(atom, self.names.funcs, "function"),), i + 1
        if shape == ops.IMM_LABEL:
            return (self._label_depth(atom),), i + 1
        raise _err(atom, f"unhandled immediate for {op}")

    def _blocktype(self, items: tuple[Node, ...], i: int) -> tuple[Optional[str], Optional[str], int]:
        """Optional $label then optional (result t). Returns (label, type, next i)."""
        label = None
        if i < len(items) and isinstance(items[i], Atom) and items[i].kind == ID:
            label = items[i].value
            i += 1
        result = None
        if i < len(items) and isinstance(items[i], SList) and items[i].head == "result":
            res = items[i].items[1:]
            if len(res) > 1:
                raise _err(items[i], "at most one block result")
            if res:
                result = _parse_valtype(res[0])
            i += 1
        return label, result, i

    # -- sequences ------------------------------------------------------------

    def _seq(self, items: tuple[Node, ...]):
        i = 0
        while i < len(items):
            node = items[i]
            if isinstance(node, SList):
                self._folded(node)
                i += 1
                continue
            if node.kind != KEYWORD:
                raise _err(node, "expected instruction")
            i = self._flat(node, items, i + 1)

    def _flat(self, atom: Atom, items: tuple[Node, ...], i: int) -> int:
        op = atom.value
        if op not in ops.OPCODES:
            raise UnknownOpcode(atom.line, atom.col, f"unknown opcode {op!r}")
        if op in ops.BLOCK_STARTS:
            label, result, i = self._blocktype(items, i)
            self.blocks.append([label, op, False])
            self.out.append(Instr(op, (result,)))
            return i
        if op in ops.MARKERS:
            if not self.blocks:
                raise _err(atom, f"{op} without an open block")
            i = self._closing_label(items, i)
            if op == "else":
                block = self.blocks[-1]
                if block[1] != "if" or block[2]:
                    raise _err(atom, "else without matching if")
                block[2] = True
            else:
                self.blocks.pop()
            self.out.append(Instr(op))
            return i
        args, i = self._immediates(op, atom, items, i)
        self.out.append(Instr(op, args))
        return i

    def _closing_label(self, items: tuple[Node, ...], i: int) -> int:
        if i < len(items) and isinstance(items[i], Atom) and items[i].kind == ID:
            if items[i].value != self.blocks[-1][0]:
                raise _err(items[i], f"mismatched label ${items[i].value}")
            return i + 1
        return i

    def _folded(self, form: SList):
        head = form.head
        if not head:
            raise _err(form, "expected instruction")
        if head not in ops.OPCODES:
            if head in ("then", "else", "result", "param", "local"):
                raise _err(form, f"unexpected ({head} ...)")
            raise UnknownOpcode(form.line, form.col, f"unknown opcode {head!r}")
        items = form.items
        if head in ("block", "loop"):
            label, result, i = self._blocktype(items, 1)
            self._nested(head, label, result, items[i:], form)
            return
        if head == "if":
            self._folded_if(form)
            return
        if head in ops.MARKERS:
            raise _err(form, f"({head}) is not a folded instruction")
        args, i = self._immediates(head, form, items, 1)
        for operand in items[i:]:
            if not isinstance(operand, SList):
                raise _err(operand, f"unexpected atom in folded {head}")
            self._folded(operand)
        self.out.append(Instr(head, args))

    def _nested(self, op: str, label: Optional[str], result: Optional[str],
                body: tuple[Node, ...], form: SList):
        depth = len(self.blocks)
        self.blocks.append([label, op, False])
        self.out.append(Instr(op, (result,)))
        self._seq(body)
        if len(self.blocks) != depth + 1:
            raise _err(form, "unclosed block inside folded instruction")
        self.blocks.pop()
        self.out.append(Instr("end"))

    def _folded_if(self, form: SList):
        items = form.items
        label, result, i = self._blocktype(items, 1)
        then_node = else_node = None
        while i < len(items):
            node = items[i]
            if isinstance(node, SList) and node.head == "then":
                then_node = node
                i += 1
                break
            if not isinstance(node, SList):
                raise _err(node, "unexpected atom in folded if")
            self._folded(node)
            i += 1
        if then_node is None:
            raise _err(form, "folded if needs a (then ...) clause")
        if i < len(items):
            if not (isinstance(items[i], SList) and items[i].head == "else"):
                raise _err(items[i], "expected (else ...) after (then ...)")
            else_node = items[i]
            i += 1
        if i < len(items):
            raise _err(items[i], "unexpected item after (else ...)")
        depth = len(self.blocks)
        self.blocks.append([label, "if", False])
        self.out.append(Instr("if", (result,)))
        self._seq(then_node.items[1:])
        if else_node is not None:
            self.blocks[-1][2] = True
            self.out.append(Instr("else"))
            self._seq(else_node.items[1:])
        if len(self.blocks) != depth + 1:
            raise _err(form, "unclosed block inside folded if")
        self.blocks.pop()
        self.out.append(Instr("end"))


# =============================================================================
# Module
# =============================================================================

@dataclass
class _Names:
    funcs: dict[str, int] = field(default_factory=dict)
    globals: dict[str, int] = field(default_factory=dict)


def _declare(table: dict[str, int], name: Optional[str], index: int, node: Node, what: str):
    if name is None:
        return
    if name in table:
        raise _err(node, f"duplicate {what} ${name}")
    table[name] = index


def _name_of(form: SList) -> Optional[str]:
    if len(form.items) > 1 and isinstance(form.items[1], Atom) and form.items[1].kind == ID:
        return form.items[1].value
    return None


def _parse_import(form: SList, index: int, names: _Names) -> Import:
    items = form.items
    if len(items) != 4 or not isinstance(items[3], SList) or items[3].head != "func":
        raise _err(form, 'expected (import "namespace" "name" (func ...))')
    namespace = _parse_string(items[1], "import namespace")
    name = _parse_string(items[2], "import name")
    desc = items[3]
    header = _parse_func_header(desc, allow_body=False)
    if header.hint is not None or header.exports:
        raise _err(desc, "imports take no annotations or exports")
    _declare(names.funcs, header.name, index, desc, "function")
    sig = FuncType(tuple(header.params), tuple(header.results))

    # Lazy import - the registry lives with the host function implementations
    from codeflow.engine.host import HOST_REGISTRY

    host = HOST_REGISTRY.get((namespace, name))
    if host is None:
        raise UnknownImport(form.line, form.col, f"unknown import {namespace}.{name}")
    if host.type != sig:
        raise UnknownImport(form.line, form.col,
                            f"import {namespace}.{name} has signature {sig}, expected {host.type}")
    return Import(namespace, name, sig)


def _parse_memory(form: SList) -> MemoryDecl:
    items = list(form.items[1:])
    if items and isinstance(items[0], Atom) and items[0].kind == ID:
        items.pop(0)
    shared = False
    numbers = []
    for item in items:
        if isinstance(item, Atom) and item.kind == KEYWORD and item.value == "shared":
            shared = True
        else:
            numbers.append(parse_int(item, 0, 65536, "page count"))
    if not 1 <= len(numbers) <= 2:
        raise _err(form, "expected (memory shared MIN MAX)")
    min_pages = numbers[0]
    max_pages = numbers[1] if len(numbers) == 2 else min_pages
    return MemoryDecl(shared=shared, min_pages=min_pages, max_pages=max_pages)


def _parse_global(form: SList) -> GlobalDef:
    items = list(form.items[1:])
    name = None
    if items and isinstance(items[0], Atom) and items[0].kind == ID:
        name = items.pop(0).value
    if len(items) != 2:
        raise _err(form, "expected (global $id? TYPE (CONST))")
    type_node, init_node = items
    mutable = False
    if isinstance(type_node, SList) and type_node.head == "mut":
        if len(type_node.items) != 2:
            raise _err(type_node, "expected (mut TYPE)")
        mutable = True
        vtype = _parse_valtype(type_node.items[1])
    else:
        vtype = _parse_valtype(type_node)
    if not isinstance(init_node, SList) or init_node.head != f"{vtype}.const" or len(init_node.items) != 2:
        raise _err(init_node, f"global initialiser must be ({vtype}.const N)")
    if vtype == "i32":
        init = parse_int(init_node.items[1], -(1 << 31), (1 << 32) - 1, "i32 constant") & 0xFFFFFFFF
    else:
        init = parse_int(init_node.items[1], -(1 << 63), (1 << 64) - 1, "i64 constant") & 0xFFFFFFFFFFFFFFFF
    return GlobalDef(type=vtype, mutable=mutable, init=init, name=name)


def _func_ref(node: Node, names: _Names) -> int:
    if isinstance(node, Atom) and node.kind == ID:
        if node.value not in names.funcs:
            raise _err(node, f"unknown function ${node.value}")
        return names.funcs[node.value]
    return parse_int(node, 0, 0xFFFFFFFF, "function index")


def parse_module(text: Union[str, bytes]) -> Module:
    """Parse CFT source into a resolved Module.

    Raises:
        CftSyntaxError (and its subclasses UnknownOpcode, UnknownImport,
        DuplicateExport, MissingExport) with line/col of the offending form.
    """
    nodes = read(text)
    if not nodes:
        raise CftSyntaxError(1, 1, "empty program: expected (module ...)")
    if len(nodes) > 1:
        raise _err(nodes[1], "only one (module ...) per file")
    root = nodes[0]
    if not isinstance(root, SList) or root.head != "module":
        raise _err(root, "expected (module ...)")

    fields = list(root.items[1:])
    for node in fields:
        if not isinstance(node, SList):
            raise _err(node, "expected module field")
        if node.head not in ("memory", "import", "func", "global", "threads", "export"):
            raise _err(node, f"unknown module field {node.head or '(...)'!r}")

    # Pass 1: index spaces. Imports come first in the function index space.
    names = _Names()
    import_forms = [f for f in fields if f.head == "import"]
    func_forms = [f for f in fields if f.head == "func"]
    global_forms = [f for f in fields if f.head == "global"]

    imports = tuple(_parse_import(f, i, names) for i, f in enumerate(import_forms))
    for i, form in enumerate(func_forms):
        _declare(names.funcs, _name_of(form), len(imports) + i, form, "function")
    globals_ = []
    for i, form in enumerate(global_forms):
        gdef = _parse_global(form)
        _declare(names.globals, gdef.name, i, form, "global")
        globals_.append(gdef)

    # Pass 2: everything else
    memories = []
    functions = []
    threads: list[int] = []
    exports: list[Export] = []
    seen_exports: set[str] = set()

    def add_export(name: str, func: int, node: Node):
        if name in seen_exports:
            raise DuplicateExport(node.line, node.col, f"duplicate export {name!r}")
        seen_exports.add(name)
        exports.append(Export(name, func))

    for form in fields:
        head = form.head
        if head == "memory":
            memories.append(_parse_memory(form))
        elif head == "func":
            index = len(imports) + len(functions)
            header = _parse_func_header(form, allow_body=True)
            body = _BodyParser(names, header).parse(form.items[header.body_start:], form)
            functions.append(FuncDef(
                name=header.name,
                params=tuple(header.params),
                results=tuple(header.results),
                locals=tuple(header.locals),
                body=body,
                hint=header.hint,
            ))
            for name, node in header.exports:
                add_export(name, index, node)
        elif head == "threads":
            threads.extend(_func_ref(node, names) for node in form.items[1:])
        elif head == "export":
            items = form.items
            if len(items) != 3 or not isinstance(items[2], SList) or items[2].head != "func" \
                    or len(items[2].items) != 2:
                raise _err(form, 'expected (export "name" (func REF))')
            add_export(_parse_string(items[1], "export name"), _func_ref(items[2].items[1], names), form)

    entry = next((e.func for e in exports if e.name == ENTRY_EXPORT), None)
    if entry is None:
        raise MissingExport(root.line, root.col, f'module has no "{ENTRY_EXPORT}" export')

    module = Module(
        memories=tuple(memories),
        imports=imports,
        functions=tuple(functions),
        globals=tuple(globals_),
        threads=tuple(threads),
        exports=tuple(exports),
        entry=entry,
    )
    logger.debug(f"Parsed module: {len(functions)} functions, {len(imports)} imports, "
                 f"{len(threads)} thread entries")
    return module
