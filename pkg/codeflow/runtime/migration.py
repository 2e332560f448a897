"""Epoch-based page migration.

At each epoch boundary every page with at least hot_threshold accesses is
considered, hottest first. Its dominant device picks the region it reads
fastest that still has room; the page moves only on a strict latency
improvement. Moving one page costs 4096 / bandwidth plus a fixed overhead.
"""

import logging
from dataclasses import dataclass
from typing import Optional

from codeflow.engine import AccessStats, Placement
from codeflow.runtime.config import MigrationPolicy
from codeflow.topology import PAGE_SIZE, Topology

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MigrationRecord:
    epoch: int
    page: int
    device: str
    from_region: str
    to_region: str
    cost_ns: float


def _best_region(t: Topology, placement: Placement, device_id: str, current: str) -> Optional[str]:
    candidates = sorted(t.regions, key=lambda reg: (t.cost(device_id, reg.id).read_latency_ns, reg.id))
    usage = placement.usage()
    for reg in candidates:
        if reg.id == current or usage[reg.id] < reg.pages:
            return reg.id
    return None


def epoch_migrate(stats: AccessStats, placement: Placement, t: Topology, policy: MigrationPolicy,
                  epoch: int = 0) -> tuple[Placement, list[MigrationRecord]]:
    """Return the new placement and the moves made; stats are reset."""
    new = placement.copy()
    records = []
    totals = stats.page_totals()
    hot = sorted((page for page, count in totals.items() if count >= policy.hot_threshold),
                 key=lambda page: (-totals[page], page))
    logger.debug(f"Epoch {epoch}: {stats.total()} accesses, {len(hot)} hot page(s)")
    for page in hot:
        device_id = stats.top_device(page)
        current = new.region_of(page)
        target = _best_region(t, new, device_id, current)
        fastest = min(t.regions, key=lambda reg: (t.cost(device_id, reg.id).read_latency_ns, reg.id)).id
        if target != fastest:
            logger.warning(f"Epoch {epoch}: page {page} cannot move to {fastest} for {device_id}: region full")
        if target is None or target == current:
            continue
        if not t.cost(device_id, target).read_latency_ns < t.cost(device_id, current).read_latency_ns:
            continue
        cost = PAGE_SIZE / t.cost(device_id, target).bandwidth_gbps + policy.migration_fixed_overhead_ns
        new.assign(page, target)
        records.append(MigrationRecord(epoch, page, device_id, current, target, cost))
        logger.info(f"Epoch {epoch}: migrated page {page} {current} -> {target} for {device_id} ({cost:.1f} ns)")
    stats.reset()
    return new, records
