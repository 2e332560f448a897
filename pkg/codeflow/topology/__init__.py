"""Topology - devices, memory regions and the access cost model."""

from codeflow.topology.lint import LintFinding, LintReport, validate_topology
from codeflow.topology.loader import dump_topology, load_topology
from codeflow.topology.model import (
    PAGE_SIZE,
    AccessCost,
    AccessOverride,
    Device,
    MemoryRegion,
    Topology,
    access_cost,
    schedulable_devices,
)

__all__ = [
    "PAGE_SIZE",
    "AccessCost",
    "AccessOverride",
    "Device",
    "MemoryRegion",
    "Topology",
    "access_cost",
    "schedulable_devices",
    "load_topology",
    "dump_topology",
    "LintFinding",
    "LintReport",
    "validate_topology",
]
