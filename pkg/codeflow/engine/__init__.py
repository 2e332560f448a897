"""Engine - deterministic interpreter over shared linear memory.

Modules:
    memory      - LinearMemory, Placement, AccessStats
    host        - host function registry and virtual I/O
    instance    - Instance, ThreadState, instantiate
    interpreter - step_thread
"""

from codeflow.engine.host import HOST_REGISTRY, HostEnv, HostFunction, handle_host_call, host_function
from codeflow.engine.instance import Instance, ThreadState, ThreadStatus, default_device, instantiate
from codeflow.engine.interpreter import StepOutcome, StepState, step_thread
from codeflow.engine.memory import AccessRecord, AccessStats, GuestTrap, LinearMemory, Placement

__all__ = [
    "HOST_REGISTRY",
    "HostEnv",
    "HostFunction",
    "handle_host_call",
    "host_function",
    "Instance",
    "ThreadState",
    "ThreadStatus",
    "default_device",
    "instantiate",
    "StepOutcome",
    "StepState",
    "step_thread",
    "AccessRecord",
    "AccessStats",
    "GuestTrap",
    "LinearMemory",
    "Placement",
]
