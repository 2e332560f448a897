"""The closed opcode set and the static facts each consumer needs about it.

Anything not named here is rejected by the parser.
"""

I32 = "i32"
I64 = "i64"
VALUE_TYPES = (I32, I64)

# Immediate shapes
IMM_NONE = "none"
IMM_CONST = "const"
IMM_LOCAL = "local"
IMM_GLOBAL = "global"
IMM_FUNC = "func"
IMM_LABEL = "label"
IMM_MEMARG = "memarg"
IMM_BLOCKTYPE = "blocktype"

_INT_BINOPS = ("add", "sub", "mul", "div_u", "rem_u", "and", "or", "xor", "shl", "shr_u")

# op -> value type, for the two-operand arithmetic ops
BINOPS: dict[str, str] = {
    **{f"i32.{name}": I32 for name in _INT_BINOPS},
    **{f"i64.{name}": I64 for name in _INT_BINOPS},
}

# two i32 operands -> i32 flag
COMPARES = frozenset({"i32.eq", "i32.ne", "i32.lt_u", "i32.lt_s", "i32.gt_u", "i32.ge_u"})

# one i32 operand -> i32 flag
TESTS = frozenset({"i32.eqz"})

# op -> (operand type, result type)
CONVERSIONS: dict[str, tuple[str, str]] = {
    "i64.extend_i32_u": (I32, I64),
    "i32.wrap_i64": (I64, I32),
}

CONSTS: dict[str, str] = {"i32.const": I32, "i64.const": I64}

# op -> (width in bytes, value type)
LOADS: dict[str, tuple[int, str]] = {
    "i32.load": (4, I32),
    "i64.load": (8, I64),
    "i32.load8_u": (1, I32),
}
STORES: dict[str, tuple[int, str]] = {
    "i32.store": (4, I32),
    "i64.store": (8, I64),
    "i32.store8": (1, I32),
}
ATOMICS = frozenset({
    "i32.atomic.load",
    "i32.atomic.store",
    "i32.atomic.rmw.add",
    "i32.atomic.rmw.cmpxchg",
})

VARIABLES: dict[str, str] = {
    "local.get": IMM_LOCAL,
    "local.set": IMM_LOCAL,
    "local.tee": IMM_LOCAL,
    "global.get": IMM_GLOBAL,
    "global.set": IMM_GLOBAL,
}

BLOCK_STARTS = frozenset({"block", "loop", "if"})
# Structural markers; they close or split a block and are not counted as
# executed or static instructions.
MARKERS = frozenset({"else", "end"})

CONTROL: dict[str, str] = {
    "block": IMM_BLOCKTYPE,
    "loop": IMM_BLOCKTYPE,
    "if": IMM_BLOCKTYPE,
    "else": IMM_NONE,
    "end": IMM_NONE,
    "br": IMM_LABEL,
    "br_if": IMM_LABEL,
    "return": IMM_NONE,
    "call": IMM_FUNC,
    "nop": IMM_NONE,
    "unreachable": IMM_NONE,
}

PARAMETRIC = frozenset({"drop", "select"})
MEMORY_CONTROL = frozenset({"memory.size", "memory.grow"})


def _build_immediates() -> dict[str, str]:
    table: dict[str, str] = {}
    for op in BINOPS:
        table[op] = IMM_NONE
    for op in COMPARES | TESTS:
        table[op] = IMM_NONE
    for op in CONVERSIONS:
        table[op] = IMM_NONE
    for op in CONSTS:
        table[op] = IMM_CONST
    for op in (*LOADS, *STORES, *ATOMICS):
        table[op] = IMM_MEMARG
    table.update(VARIABLES)
    table.update(CONTROL)
    for op in PARAMETRIC | MEMORY_CONTROL:
        table[op] = IMM_NONE
    return table


# op -> immediate shape. Membership in this dict *is* the closed opcode set.
IMMEDIATES: dict[str, str] = _build_immediates()
OPCODES = frozenset(IMMEDIATES)

# Static profiling categories
MEMORY_OPS = frozenset(LOADS) | frozenset(STORES)
ARITH_OPS = frozenset(BINOPS) | COMPARES | TESTS


def is_counted(op: str) -> bool:
    """True for instructions that count towards static and executed totals."""
    return op not in MARKERS
