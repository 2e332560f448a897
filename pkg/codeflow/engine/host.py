"""Host functions.

Every importable function is registered here with @host_function; the
parser checks imports against HOST_REGISTRY and instantiate refuses a
module whose imports are not all present. All I/O is virtual: input files
are preloaded byte strings, writes are captured per fd, and the socket is a
single in-instance loopback FIFO.

A handler receives (instance, thread, args) with args as unsigned i32 values
and returns a tuple of results, or None when the calling thread was
suspended (blocked on join, or finished by proc_exit).
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

from codeflow.cft.ir import FuncType
from codeflow.enums import TrapKind
from codeflow.errors import ImportNotSatisfied
from codeflow.engine.memory import GuestTrap

logger = logging.getLogger(__name__)

ERRNO_SUCCESS = 0
ERRNO_BADF = 8

MASK32 = 0xFFFFFFFF


@dataclass(frozen=True)
class HostFunction:
    namespace: str
    name: str
    type: FuncType
    handler: Callable


# Registry of host functions, keyed by (namespace, name)
HOST_REGISTRY: dict[tuple[str, str], HostFunction] = {}


def host_function(namespace: str, name: str, params: tuple[str, ...] = (), results: tuple[str, ...] = ()):
    """Decorator to register a host function."""
    def decorator(func: Callable):
        HOST_REGISTRY[(namespace, name)] = HostFunction(namespace, name, FuncType(params, results), func)
        logger.debug(f"Registered host function: {namespace}.{name}")
        return func
    return decorator


def handle_host_call(inst, tid: int, namespace: str, name: str, args: list[int]) -> Optional[tuple[int, ...]]:
    """Dispatch an import call made by thread tid.

    Raises:
        ImportNotSatisfied: nothing is registered under namespace.name.
    """
    fn = HOST_REGISTRY.get((namespace, name))
    if fn is None:
        raise ImportNotSatisfied(f"no host function for {namespace}.{name}")
    inst.host.calls += 1
    return fn.handler(inst, inst.threads[tid], args)


# =============================================================================
# Host environment
# =============================================================================

@dataclass
class HostEnv:
    """Run inputs for the host side: fd -> preloaded file content."""

    files: dict[int, bytes] = field(default_factory=dict)


class HostState:
    """Mutable host side of one Instance, built fresh from a HostEnv."""

    def __init__(self, env: HostEnv):
        self.files = {fd: bytes(content) for fd, content in env.files.items()}
        self.cursors = {fd: 0 for fd in self.files}
        self.outputs: dict[int, bytearray] = {}
        self.socket = bytearray()
        self.calls = 0


def _put_u32(inst, addr: int, value: int):
    inst.memory.write(addr, (value & MASK32).to_bytes(4, "little"))


# =============================================================================
# wasi namespace
# =============================================================================

@host_function("wasi", "fd_read", ("i32", "i32", "i32", "i32"), ("i32",))
def fd_read(inst, thread, args):
    fd, ptr, length, nread_ptr = args
    inst.memory.check(ptr, length, TrapKind.BAD_HOST_ARGS)
    inst.memory.check(nread_ptr, 4, TrapKind.BAD_HOST_ARGS)
    content = inst.host.files.get(fd)
    if content is None:
        return (ERRNO_BADF,)
    cursor = inst.host.cursors[fd]
    chunk = content[cursor:cursor + length]
    inst.memory.write(ptr, chunk)
    inst.host.cursors[fd] = cursor + len(chunk)
    _put_u32(inst, nread_ptr, len(chunk))
    return (ERRNO_SUCCESS,)


@host_function("wasi", "fd_write", ("i32", "i32", "i32", "i32"), ("i32",))
def fd_write(inst, thread, args):
    fd, ptr, length, nwritten_ptr = args
    payload = inst.memory.read(ptr, length)
    inst.memory.check(nwritten_ptr, 4, TrapKind.BAD_HOST_ARGS)
    inst.host.outputs.setdefault(fd, bytearray()).extend(payload)
    _put_u32(inst, nwritten_ptr, len(payload))
    return (ERRNO_SUCCESS,)


@host_function("wasi", "sock_send", ("i32", "i32"), ("i32",))
def sock_send(inst, thread, args):
    ptr, length = args
    inst.host.socket.extend(inst.memory.read(ptr, length))
    return (length,)


@host_function("wasi", "sock_recv", ("i32", "i32"), ("i32",))
def sock_recv(inst, thread, args):
    ptr, length = args
    inst.memory.check(ptr, length, TrapKind.BAD_HOST_ARGS)
    count = min(length, len(inst.host.socket))
    inst.memory.write(ptr, bytes(inst.host.socket[:count]))
    del inst.host.socket[:count]
    return (count,)


@host_function("wasi", "clock_time_get", ("i32",), ("i32",))
def clock_time_get(inst, thread, args):
    (ptr,) = args
    inst.memory.write(ptr, int(thread.clock_ns).to_bytes(8, "little"))
    return (ERRNO_SUCCESS,)


@host_function("wasi", "proc_exit", ("i32",), ())
def proc_exit(inst, thread, args):
    (code,) = args
    inst.exit(thread, code)
    return None


# =============================================================================
# codeflow namespace - threads
# =============================================================================

@host_function("codeflow", "spawn", ("i32", "i32"), ("i32",))
def spawn(inst, thread, args):
    index, arg = args
    if index >= len(inst.module.threads):
        raise GuestTrap(TrapKind.BAD_HOST_ARGS, f"thread table index {index} out of range")
    child = inst.spawn(inst.module.threads[index], arg, thread)
    return (child.tid,)


@host_function("codeflow", "join", ("i32",), ("i32",))
def join(inst, thread, args) -> Optional[tuple[int]]:
    (tid,) = args
    if tid >= len(inst.threads) or tid == thread.tid:
        raise GuestTrap(TrapKind.BAD_HOST_ARGS, f"cannot join thread {tid}")
    target = inst.threads[tid]
    if target.finished:
        return (inst.complete_join(thread, target),)
    thread.block_on(tid)
    return None
