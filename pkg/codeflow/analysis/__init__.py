"""Analysis - call graph, static capability profiles and device affinity."""

from codeflow.analysis.affinity import (
    AffinityDecision,
    FunctionAnalysis,
    analyze_module,
    detect_affinity,
    entry_functions,
)
from codeflow.analysis.callgraph import build_call_graph, closure
from codeflow.analysis.profile import CapabilityProfile, loop_depth, profile_function

__all__ = [
    "AffinityDecision",
    "FunctionAnalysis",
    "analyze_module",
    "detect_affinity",
    "entry_functions",
    "build_call_graph",
    "closure",
    "CapabilityProfile",
    "loop_depth",
    "profile_function",
]
