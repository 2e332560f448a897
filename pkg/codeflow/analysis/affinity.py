"""Device affinity detection.

Rules, first match wins:
    ANNOTATION        the function carries a (thread <class>) hint
    FILE_IO           file_ops > 0 and file_ops >= net_ops -> storage_processor
    NET_IO            net_ops > 0                          -> network_processor
    COMPUTE_INTENSITY loop, memory traffic, arith/mem >= r  -> parallel_accelerator
    DEFAULT_CPU       everything else                      -> cpu
"""

import logging
from dataclasses import dataclass
from typing import Optional

from codeflow.analysis.callgraph import build_call_graph
from codeflow.analysis.profile import CapabilityProfile, profile_function
from codeflow.cft import ENTRY_EXPORT, AffinityHint, Module
from codeflow.config import settings
from codeflow.enums import DeviceClass

logger = logging.getLogger(__name__)

SOURCE_ANNOTATION = "annotation"
SOURCE_RULE = "rule"


@dataclass(frozen=True)
class AffinityDecision:
    device_class: DeviceClass
    source: str
    rationale: str


def detect_affinity(p: CapabilityProfile, hint: Optional[AffinityHint] = None,
                    r_threshold: Optional[float] = None) -> AffinityDecision:
    if r_threshold is None:
        r_threshold = settings.r_threshold
    if hint is not None:
        return AffinityDecision(DeviceClass(hint.device_class), SOURCE_ANNOTATION, "ANNOTATION")
    if p.file_ops > 0 and p.file_ops >= p.net_ops:
        return AffinityDecision(DeviceClass.STORAGE_PROCESSOR, SOURCE_RULE, "FILE_IO")
    if p.net_ops > 0:
        return AffinityDecision(DeviceClass.NETWORK_PROCESSOR, SOURCE_RULE, "NET_IO")
    if p.max_loop_depth >= 1 and p.mem_ops > 0 and p.arith_ops / p.mem_ops >= r_threshold:
        return AffinityDecision(DeviceClass.PARALLEL_ACCELERATOR, SOURCE_RULE, "COMPUTE_INTENSITY")
    return AffinityDecision(DeviceClass.CPU, SOURCE_RULE, "DEFAULT_CPU")


@dataclass(frozen=True)
class FunctionAnalysis:
    function: int
    name: str
    profile: CapabilityProfile
    decision: AffinityDecision

    def to_dict(self) -> dict:
        return {
            "function": self.name,
            "index": self.function,
            "profile": self.profile.to_dict(),
            "decision": self.decision.device_class.value,
            "source": self.decision.source,
            "rationale": self.decision.rationale,
        }


def entry_functions(m: Module) -> list[int]:
    """"main" followed by the thread table, without repeats."""
    entries = []
    main = m.export(ENTRY_EXPORT)
    for idx in ([main] if main is not None else []) + list(m.threads):
        if idx not in entries:
            entries.append(idx)
    return entries


def analyze_module(m: Module, r_threshold: Optional[float] = None) -> list[FunctionAnalysis]:
    """Profile and classify every thread entry of a validated module."""
    g = build_call_graph(m)
    results = []
    for idx in entry_functions(m):
        profile = profile_function(m, idx, g)
        decision = detect_affinity(profile, m.func(idx).hint, r_threshold)
        logger.info(f"Affinity {m.func_name(idx)}: {decision.device_class.value} ({decision.rationale})")
        results.append(FunctionAnalysis(idx, m.func_name(idx), profile, decision))
    return results
