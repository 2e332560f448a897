"""Thread-to-device scheduling.

A decided class maps to the lexicographically smallest schedulable device
of that class; when the topology has none, the thread falls back to the
smallest cpu device. Latencies never enter the decision.
"""

import logging
from dataclasses import dataclass
from typing import Mapping

from codeflow.analysis import AffinityDecision, entry_functions
from codeflow.cft import Module
from codeflow.enums import DeviceClass
from codeflow.errors import NoSchedulableDevice, ScheduleError
from codeflow.topology import Topology, schedulable_devices

logger = logging.getLogger(__name__)

FALLBACK_CPU = "FALLBACK_CPU"


@dataclass(frozen=True)
class PlanEntry:
    device: str
    device_class: DeviceClass
    source: str
    rationale: str


@dataclass(frozen=True)
class SchedulePlan:
    entries: dict[int, PlanEntry]

    def device_of(self, func_idx: int) -> str:
        return self.entries[func_idx].device

    def devices(self) -> dict[int, str]:
        return {idx: entry.device for idx, entry in self.entries.items()}

    def pairs(self) -> list[tuple[int, str]]:
        """Distinct (function, device) pairs in function order."""
        return sorted({(idx, entry.device) for idx, entry in self.entries.items()})


def schedule(m: Module, t: Topology, decisions: Mapping[int, AffinityDecision]) -> SchedulePlan:
    """Map "main" and every thread-table function to a device.

    Raises:
        NoSchedulableDevice: the topology has no schedulable cpu device.
        ScheduleError: an entry function has no decision.
    """
    by_class: dict[DeviceClass, str] = {}
    for dev in schedulable_devices(t):
        by_class.setdefault(dev.device_class, dev.id)
    cpu = by_class.get(DeviceClass.CPU)
    if cpu is None:
        raise NoSchedulableDevice("topology has no schedulable cpu device")

    entries = {}
    for idx in entry_functions(m):
        decision = decisions.get(idx)
        if decision is None:
            raise ScheduleError(f"no affinity decision for {m.func_name(idx)}")
        device = by_class.get(decision.device_class)
        rationale = decision.rationale
        if device is None:
            logger.warning(f"No {decision.device_class.value} device for {m.func_name(idx)}; falling back to {cpu}")
            device = cpu
            rationale = FALLBACK_CPU
        entries[idx] = PlanEntry(device, decision.device_class, decision.source, rationale)
        logger.info(f"Scheduled {m.func_name(idx)} on {device} ({rationale})")
    return SchedulePlan(entries)
