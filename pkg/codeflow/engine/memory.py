"""Linear memory, page placement and access statistics.

Placement and AccessStats live with the engine because the interpreter
charges every access against them; the runtime owns the policy that
rewrites them between epochs.
"""

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

from codeflow.cft.ir import WASM_PAGE_SIZE
from codeflow.enums import AccessKind, TrapKind
from codeflow.errors import ConfigError
from codeflow.topology import PAGE_SIZE, Topology

PAGES_PER_WASM_PAGE = WASM_PAGE_SIZE // PAGE_SIZE


class GuestTrap(Exception):
    """Raised inside the interpreter and converted to a trapped StepOutcome."""

    def __init__(self, kind: TrapKind, detail: str = ""):
        self.kind = kind
        self.detail = detail
        super().__init__(f"{kind.value}: {detail}" if detail else kind.value)


class LinearMemory:
    """One shared byte array; every thread's view aliases it."""

    def __init__(self, pages: int, max_pages: int):
        self.data = bytearray(pages * WASM_PAGE_SIZE)
        self.max_pages = max_pages

    def __len__(self) -> int:
        return len(self.data)

    @property
    def pages(self) -> int:
        return len(self.data) // WASM_PAGE_SIZE

    def check(self, addr: int, width: int, kind: TrapKind = TrapKind.OOB_MEMORY):
        if addr < 0 or width < 0 or addr + width > len(self.data):
            raise GuestTrap(kind, f"access of {width} bytes at {addr} beyond {len(self.data)}")

    def load(self, addr: int, width: int) -> int:
        self.check(addr, width)
        return int.from_bytes(self.data[addr:addr + width], "little")

    def store(self, addr: int, width: int, value: int):
        self.check(addr, width)
        self.data[addr:addr + width] = (value & ((1 << (8 * width)) - 1)).to_bytes(width, "little")

    def read(self, addr: int, length: int) -> bytes:
        self.check(addr, length, TrapKind.BAD_HOST_ARGS)
        return bytes(self.data[addr:addr + length])

    def write(self, addr: int, payload: bytes):
        self.check(addr, len(payload), TrapKind.BAD_HOST_ARGS)
        self.data[addr:addr + len(payload)] = payload

    def grow(self, delta: int) -> int:
        """Grow by delta wasm pages; returns the old page count or -1."""
        old = self.pages
        if old + delta > self.max_pages:
            return -1
        self.data.extend(bytes(delta * WASM_PAGE_SIZE))
        return old


# =============================================================================
# Placement
# =============================================================================

class Placement:
    """Page index (4096-byte pages) -> region id, total over current memory."""

    def __init__(self, regions: Iterable[str] = ()):
        self.pages: list[str] = list(regions)

    @classmethod
    def uniform(cls, num_pages: int, region_id: str) -> "Placement":
        return cls([region_id] * num_pages)

    def __len__(self) -> int:
        return len(self.pages)

    def __eq__(self, other) -> bool:
        return isinstance(other, Placement) and self.pages == other.pages

    def region_of(self, page: int) -> str:
        return self.pages[page]

    def assign(self, page: int, region_id: str):
        self.pages[page] = region_id

    def extend(self, count: int, region_id: str):
        self.pages.extend([region_id] * count)

    def copy(self) -> "Placement":
        return Placement(self.pages)

    def usage(self) -> Counter:
        """region id -> pages placed there"""
        return Counter(self.pages)

    def free_pages(self, t: Topology, region_id: str) -> int:
        return t.region(region_id).pages - self.usage()[region_id]

    def check_capacity(self, t: Topology):
        for region_id, used in sorted(self.usage().items()):
            region = t.region(region_id)
            if used > region.pages:
                raise ConfigError(f"region {region_id} holds {used} pages but has room for {region.pages}")


# =============================================================================
# Access accounting
# =============================================================================

@dataclass(frozen=True)
class AccessRecord:
    tid: int
    page: int
    region: str
    kind: AccessKind
    nbytes: int
    cost_ns: float


class AccessStats:
    """Per-epoch (page, device) -> access count."""

    def __init__(self):
        self.counts: Counter = Counter()

    def record(self, page: int, device_id: str):
        self.counts[(page, device_id)] += 1

    def total(self) -> int:
        return sum(self.counts.values())

    def page_totals(self) -> Counter:
        totals = Counter()
        for (page, _), count in self.counts.items():
            totals[page] += count
        return totals

    def top_device(self, page: int) -> Optional[str]:
        """Device with the most accesses to page; ties go to the smallest id."""
        best = None
        for (p, device_id), count in self.counts.items():
            if p != page:
                continue
            if best is None or count > best[0] or (count == best[0] and device_id < best[1]):
                best = (count, device_id)
        return best[1] if best else None

    def reset(self):
        self.counts.clear()
