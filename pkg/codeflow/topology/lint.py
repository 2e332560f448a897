"""Topology lints.

Structural rules are always checked. The ordering rules are opt-in: they
encode the expected shape of a CXL system (system memory faster than local
CXL, local CXL faster than remote CXL, CXL narrower than remote DRAM) and
are reported as warnings only.
"""

import logging
from dataclasses import dataclass, field

from codeflow.enums import CxlType, DeviceClass, RegionKind
from codeflow.topology.model import Topology

logger = logging.getLogger(__name__)

ERROR = "error"
WARNING = "warning"

# Expected read latency order, fastest first
LATENCY_CHAIN = (RegionKind.DRAM_LOCAL, RegionKind.CXL_LOCAL, RegionKind.CXL_REMOTE)


@dataclass(frozen=True)
class LintFinding:
    rule: str
    severity: str
    message: str
    subject: str = ""

    def to_dict(self) -> dict:
        return {"rule": self.rule, "severity": self.severity, "subject": self.subject, "message": self.message}


@dataclass
class LintReport:
    findings: list[LintFinding] = field(default_factory=list)

    @property
    def errors(self) -> list[LintFinding]:
        return [f for f in self.findings if f.severity == ERROR]

    @property
    def ok(self) -> bool:
        return not self.errors

    def rules(self) -> set[str]:
        return {f.rule for f in self.findings}

    def add(self, rule: str, severity: str, message: str, subject: str = ""):
        self.findings.append(LintFinding(rule, severity, message, subject))


def _check_structure(t: Topology, report: LintReport):
    if not any(dev.device_class == DeviceClass.CPU and dev.schedulable for dev in t.devices):
        report.add("NO_CPU_DEVICE", ERROR, "no schedulable cpu device; threads have nowhere to fall back to")

    for dev in t.devices:
        if dev.cxl_type == CxlType.TYPE3_MEMORY_ONLY and (
                dev.compute_ns_per_instr is not None or dev.jit_ns_per_instr):
            report.add("MEMORY_DEVICE_COMPUTE", WARNING,
                       f"memory-only device {dev.id} declares compute costs that are never used", dev.id)

    owned = {dev.local_region for dev in t.devices if dev.local_region}
    for reg in t.regions_of_kind(RegionKind.DEVICE_LOCAL):
        if reg.id not in owned:
            report.add("ORPHAN_DEVICE_LOCAL", WARNING,
                       f"device_local region {reg.id} is not the local_region of any device", reg.id)


def _check_ordering(t: Topology, report: LintReport):
    # Every system-memory region must beat every CXL region; between the CXL
    # kinds only the fastest region of each is compared.
    present = [kind for kind in LATENCY_CHAIN if t.regions_of_kind(kind)]
    for faster, slower in zip(present, present[1:]):
        latencies = [reg.read_latency_ns for reg in t.regions_of_kind(faster)]
        bound, label = (max(latencies), "max") if faster == RegionKind.DRAM_LOCAL else (min(latencies), "min")
        best = min(reg.read_latency_ns for reg in t.regions_of_kind(slower))
        if not bound < best:
            report.add("PAPER_ORDER_LATENCY", WARNING,
                       f"{label} {faster.value} read latency {bound:g} ns is not below "
                       f"min {slower.value} read latency {best:g} ns")

    cxl = t.regions_of_kind(RegionKind.CXL_LOCAL) + t.regions_of_kind(RegionKind.CXL_REMOTE)
    remote = t.regions_of_kind(RegionKind.DRAM_REMOTE)
    if cxl and remote:
        widest = max(reg.bandwidth_gbps for reg in cxl)
        narrowest = min(reg.bandwidth_gbps for reg in remote)
        if not widest < narrowest:
            report.add("PAPER_ORDER_BANDWIDTH", WARNING,
                       f"max cxl bandwidth {widest:g} GB/s is not below "
                       f"min dram_remote bandwidth {narrowest:g} GB/s")


def validate_topology(t: Topology, paper_ordering_lint: bool = False) -> LintReport:
    """Lint a loaded topology. Never raises."""
    report = LintReport()
    _check_structure(t, report)
    if paper_ordering_lint:
        _check_ordering(t, report)
    for finding in report.findings:
        logger.info(f"Topology {finding.severity}: {finding.rule}: {finding.message}")
    return report
