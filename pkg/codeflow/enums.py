"""Closed enumerations shared across packages."""

from enum import Enum


class DeviceClass(str, Enum):
    """What kind of processor a thread wants (and a device offers)."""

    CPU = "cpu"
    PARALLEL_ACCELERATOR = "parallel_accelerator"
    STORAGE_PROCESSOR = "storage_processor"
    NETWORK_PROCESSOR = "network_processor"


class CxlType(str, Enum):
    NONE = "none"
    TYPE2 = "type2"
    TYPE3_MEMORY_ONLY = "type3_memory_only"


class RegionKind(str, Enum):
    DRAM_LOCAL = "dram_local"
    DRAM_REMOTE = "dram_remote"
    CXL_LOCAL = "cxl_local"
    CXL_REMOTE = "cxl_remote"
    DEVICE_LOCAL = "device_local"


class TrapKind(str, Enum):
    OOB_MEMORY = "oob_memory"
    DIV_BY_ZERO = "div_by_zero"
    UNREACHABLE = "unreachable"
    STACK_EXHAUSTED = "stack_exhausted"
    BAD_HOST_ARGS = "bad_host_args"


class AccessKind(str, Enum):
    READ = "read"
    WRITE = "write"
