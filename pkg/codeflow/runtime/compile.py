"""JIT/AOT compile-cost model.

compile_ns(f, d) = instr_count over f's call closure x d.jit_ns_per_instr.
AOT pays every planned pair before time zero; JIT pays a pair once, on the
clock of the first thread that executes it.
"""

from dataclasses import dataclass, field

from codeflow.analysis import build_call_graph, profile_function
from codeflow.cft import Module
from codeflow.runtime.config import CompileMode
from codeflow.runtime.scheduler import SchedulePlan
from codeflow.topology import Topology


@dataclass
class CompileSchedule:
    mode: CompileMode
    costs: dict[tuple[int, str], float]
    charged: set = field(default_factory=set)

    @property
    def aot_compile_ns(self) -> float:
        return sum(self.costs.values()) if self.mode == CompileMode.AOT else 0.0

    def charge(self, func_idx: int, device_id: str) -> float:
        """Compile charge for a thread starting (func_idx, device_id)."""
        if self.mode == CompileMode.AOT:
            return 0.0
        key = (func_idx, device_id)
        if key in self.charged:
            return 0.0
        self.charged.add(key)
        return self.costs[key]


def compile_cost(m: Module, plan: SchedulePlan, t: Topology, mode: CompileMode) -> CompileSchedule:
    g = build_call_graph(m)
    costs = {}
    for func_idx, device_id in plan.pairs():
        instrs = profile_function(m, func_idx, g).instr_count
        costs[(func_idx, device_id)] = instrs * t.device(device_id).jit_ns_per_instr
    return CompileSchedule(CompileMode(mode), costs)
