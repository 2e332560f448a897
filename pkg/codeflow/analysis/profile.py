"""Static capability profiles.

Counts are taken over the transitive closure of a function with every body
counted once, so recursion and repeated call sites never multiply them.
"""

from dataclasses import asdict, dataclass
from typing import Optional

import networkx as nx

from codeflow.analysis.callgraph import build_call_graph, closure
from codeflow.cft import Module
from codeflow.cft import opcodes as ops

FILE_IMPORTS = frozenset({("wasi", "fd_read"), ("wasi", "fd_write")})
NET_IMPORTS = frozenset({("wasi", "sock_send"), ("wasi", "sock_recv")})


@dataclass(frozen=True)
class CapabilityProfile:
    file_ops: int = 0
    net_ops: int = 0
    atomic_ops: int = 0
    mem_ops: int = 0
    arith_ops: int = 0
    max_loop_depth: int = 0
    instr_count: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def loop_depth(body) -> int:
    """Deepest static nesting of loop blocks in one body."""
    deepest = 0
    open_blocks = []
    for instr in body:
        if instr.op in ops.BLOCK_STARTS:
            open_blocks.append(instr.op)
            deepest = max(deepest, open_blocks.count("loop"))
        elif instr.op == "end" and open_blocks:
            open_blocks.pop()
    return deepest


def profile_function(m: Module, f: int, g: Optional[nx.DiGraph] = None) -> CapabilityProfile:
    if g is None:
        g = build_call_graph(m)
    counts = dict(file_ops=0, net_ops=0, atomic_ops=0, mem_ops=0, arith_ops=0, instr_count=0)
    depth = 0
    for idx in sorted(closure(g, f)):
        if m.is_import(idx):
            continue
        body = m.func(idx).body
        depth = max(depth, loop_depth(body))
        for instr in body:
            op = instr.op
            if not ops.is_counted(op):
                continue
            counts["instr_count"] += 1
            if op in ops.MEMORY_OPS:
                counts["mem_ops"] += 1
            elif op in ops.ARITH_OPS:
                counts["arith_ops"] += 1
            elif op in ops.ATOMICS:
                counts["atomic_ops"] += 1
            elif op == "call" and m.is_import(instr.arg(0)):
                key = m.imports[instr.arg(0)].key
                if key in FILE_IMPORTS:
                    counts["file_ops"] += 1
                elif key in NET_IMPORTS:
                    counts["net_ops"] += 1
    return CapabilityProfile(max_loop_depth=depth, **counts)
