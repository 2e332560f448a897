"""Topology models.

Field names follow the topology JSON schema exactly; `class` is a Python
keyword so Device.device_class carries it as an alias. Regions and devices
are immutable; the resolved (device, region) cost table is built at construction.
"""

from dataclasses import dataclass
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, PrivateAttr, field_validator

from codeflow.enums import AccessKind, CxlType, DeviceClass, RegionKind
from codeflow.errors import UnknownDevice, UnknownRegion

PAGE_SIZE = 4096


class MemoryRegion(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    id: str
    kind: RegionKind
    read_latency_ns: PositiveFloat
    write_latency_ns: PositiveFloat
    bandwidth_gbps: PositiveFloat
    capacity_bytes: PositiveInt

    @field_validator("capacity_bytes")
    @classmethod
    def _page_multiple(cls, value: int) -> int:
        if value % PAGE_SIZE:
            raise ValueError(f"capacity must be a multiple of {PAGE_SIZE} bytes")
        return value

    @property
    def pages(self) -> int:
        return self.capacity_bytes // PAGE_SIZE


class Device(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    id: str
    device_class: DeviceClass = Field(alias="class")
    cxl_type: CxlType = CxlType.NONE
    compute_ns_per_instr: Optional[PositiveFloat] = None
    jit_ns_per_instr: float = Field(default=0.0, ge=0.0)
    local_region: Optional[str] = None

    @property
    def schedulable(self) -> bool:
        """Memory-only expanders hold data but never run threads."""
        return self.cxl_type != CxlType.TYPE3_MEMORY_ONLY


class AccessOverride(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    device: str
    region: str
    read_latency_ns: PositiveFloat
    write_latency_ns: PositiveFloat
    bandwidth_gbps: PositiveFloat


@dataclass(frozen=True)
class AccessCost:
    """Resolved numbers for one (device, region) pair."""

    read_latency_ns: float
    write_latency_ns: float
    bandwidth_gbps: float

    def latency(self, kind: AccessKind) -> float:
        return self.read_latency_ns if kind == AccessKind.READ else self.write_latency_ns


class Topology(BaseModel):
    model_config = ConfigDict(extra="forbid")

    devices: list[Device]
    regions: list[MemoryRegion]
    access_overrides: list[AccessOverride] = Field(default_factory=list)

    _costs: dict[tuple[str, str], AccessCost] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context) -> None:
        costs = {}
        for dev in self.devices:
            for reg in self.regions:
                costs[(dev.id, reg.id)] = AccessCost(reg.read_latency_ns, reg.write_latency_ns, reg.bandwidth_gbps)
        for ov in self.access_overrides:
            costs[(ov.device, ov.region)] = AccessCost(ov.read_latency_ns, ov.write_latency_ns, ov.bandwidth_gbps)
        self._costs = costs

    # -------------------------------------------------------------------------
    # Lookup
    # -------------------------------------------------------------------------

    def device(self, device_id: str) -> Device:
        for dev in self.devices:
            if dev.id == device_id:
                return dev
        raise UnknownDevice(f"unknown device {device_id!r}")

    def region(self, region_id: str) -> MemoryRegion:
        for reg in self.regions:
            if reg.id == region_id:
                return reg
        raise UnknownRegion(f"unknown region {region_id!r}")

    def regions_of_kind(self, kind: RegionKind) -> list[MemoryRegion]:
        return [reg for reg in self.regions if reg.kind == kind]

    # -------------------------------------------------------------------------
    # Access cost model
    # -------------------------------------------------------------------------

    @property
    def cost_model(self) -> dict[tuple[str, str], AccessCost]:
        """(device id, region id) -> resolved numbers; overrides replace region defaults."""
        return self._costs

    def cost(self, device_id: str, region_id: str) -> AccessCost:
        found = self.cost_model.get((device_id, region_id))
        if found is None:
            self.device(device_id)
            self.region(region_id)
        return found


def access_cost(t: Topology, device_id: str, region_id: str, kind: AccessKind, nbytes: int) -> float:
    """Nanoseconds for one access: latency(kind) + bytes / bandwidth.

    With bandwidth in GB/s (decimal), bytes / bandwidth_gbps is already in ns.

    Raises:
        ValueError: nbytes is not positive.
        UnknownDevice / UnknownRegion: the pair is not in the topology.
    """
    if nbytes <= 0:
        raise ValueError(f"access size must be positive, got {nbytes}")
    cost = t.cost(device_id, region_id)
    return cost.latency(AccessKind(kind)) + nbytes / cost.bandwidth_gbps


def schedulable_devices(t: Topology) -> list[Device]:
    """Devices that can run threads, sorted by id."""
    return sorted((dev for dev in t.devices if dev.schedulable), key=lambda dev: dev.id)
