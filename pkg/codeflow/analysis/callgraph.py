"""Static call graph over the function index space."""

import networkx as nx

from codeflow.cft import Module


def build_call_graph(m: Module) -> nx.DiGraph:
    """One node per function index, one edge per distinct caller -> callee pair.

    Imports are leaf nodes carrying namespace and name attributes; defined
    functions carry their display name. Cycles from recursion are kept.
    """
    g = nx.DiGraph()
    for idx, imp in enumerate(m.imports):
        g.add_node(idx, host=True, namespace=imp.namespace, name=imp.name)
    for i, func in enumerate(m.functions):
        idx = m.num_imports + i
        g.add_node(idx, host=False, name=m.func_name(idx))
    for i, func in enumerate(m.functions):
        caller = m.num_imports + i
        for instr in func.body:
            if instr.op == "call" and m.has_func(instr.arg(0)):
                g.add_edge(caller, instr.arg(0))
    return g


def closure(g: nx.DiGraph, f: int) -> set[int]:
    """f plus every function reachable from it."""
    return {f} | nx.descendants(g, f)
