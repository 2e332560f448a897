"""Run orchestration.

analysis -> schedule -> compile costs -> instantiate -> round-robin steps,
with page migration at epoch boundaries. Epochs are counted in global
executed instructions and checked after every quantum step.
"""

import hashlib
import logging
import time
from dataclasses import dataclass
from typing import Optional

from codeflow.analysis import analyze_module
from codeflow.cft import Module, validate_module
from codeflow.engine import HostEnv, Placement, StepOutcome, instantiate, step_thread
from codeflow.engine.memory import PAGES_PER_WASM_PAGE
from codeflow.errors import ConfigError, ModuleRejected, UnknownRegion
from codeflow.runtime import report as rpt
from codeflow.runtime.compile import compile_cost
from codeflow.runtime.config import FIRST_REGION, RunConfig
from codeflow.runtime.migration import MigrationRecord, epoch_migrate
from codeflow.runtime.scheduler import schedule
from codeflow.topology import Topology

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepRecord:
    tid: int
    outcome: StepOutcome
    compile_ns: float


def initial_placement(m: Module, t: Topology, choice: str) -> Placement:
    """Every initial page in one region: regions[0] or a named region.

    Raises:
        ConfigError: unknown region, or not enough room for the memory.
    """
    region_id = t.regions[0].id if choice == FIRST_REGION else choice
    try:
        region = t.region(region_id)
    except UnknownRegion:
        raise ConfigError(f"initial placement names unknown region {region_id!r}") from None
    pages = m.memory.min_pages * PAGES_PER_WASM_PAGE
    if pages > region.pages:
        raise ConfigError(f"region {region_id} has room for {region.pages} pages, memory needs {pages}")
    return Placement.uniform(pages, region_id)


class Runner:
    """Holds one run's instance, plan, placement and logs."""

    def __init__(self, m: Module, t: Topology, cfg: Optional[RunConfig] = None,
                 env: Optional[HostEnv] = None, log_accesses: bool = False):
        report = validate_module(m)
        if not report.ok:
            raise ModuleRejected(report)
        self.module = m
        self.topology = t
        self.cfg = cfg or RunConfig()
        self.analysis = analyze_module(m, self.cfg.r_threshold)
        self.plan = schedule(m, t, {a.function: a.decision for a in self.analysis})
        self.compile = compile_cost(m, self.plan, t, self.cfg.mode)
        self.inst = instantiate(
            m, t, initial_placement(m, t, self.cfg.initial_placement), env,
            devices=self.plan.devices(), log_accesses=log_accesses,
        )
        self.steps: list[StepRecord] = []
        self.migrations: list[MigrationRecord] = []
        self.executed = 0
        self.epochs = 0
        policy = self.cfg.migration
        self.next_epoch = policy.epoch_instructions if policy else None

    @property
    def placement(self) -> Placement:
        return self.inst.placement

    @property
    def access_log(self):
        return self.inst.access_log

    def _start(self, tid: int) -> float:
        thread = self.inst.threads[tid]
        if thread.started:
            return 0.0
        cost = self.compile.charge(thread.entry, thread.device)
        thread.compile_ns += cost
        thread.clock_ns += cost
        return cost

    def _epoch(self):
        policy = self.cfg.migration
        if policy is None or self.executed < self.next_epoch:
            return
        self.epochs += 1
        placement, records = epoch_migrate(self.inst.stats, self.inst.placement, self.topology, policy, self.epochs)
        self.inst.placement = placement
        self.migrations.extend(records)
        self.next_epoch = (self.executed // policy.epoch_instructions + 1) * policy.epoch_instructions

    def run(self) -> rpt.RunReport:
        inst = self.inst
        start = time.perf_counter()
        status = None
        while status is None:
            progressed = False
            tid = 0
            while tid < len(inst.threads) and not inst.done:
                if inst.is_ready(tid):
                    compile_ns = self._start(tid)
                    outcome = step_thread(inst, tid, self.cfg.quantum)
                    self.steps.append(StepRecord(tid, outcome, compile_ns))
                    self.executed += outcome.executed
                    progressed = True
                    self._epoch()
                    limit = self.cfg.max_instructions
                    if limit is not None and self.executed >= limit:
                        status = rpt.INSTRUCTION_LIMIT
                        break
                tid += 1
            if status is not None:
                break
            if inst.trap is not None:
                status = rpt.TRAPPED
            elif inst.exit_code is not None:
                status = rpt.EXITED
            elif inst.done:
                status = rpt.OK
            elif not progressed:
                status = rpt.DEADLOCK
                logger.error("Deadlock: no runnable thread while "
                             f"{sum(not t.finished for t in inst.threads)} remain unfinished")
        duration = time.perf_counter() - start
        logger.info(f"Run finished: {status} after {self.executed} instructions in {duration:.2f}s")
        return self.report(status)

    # -------------------------------------------------------------------------
    # Report
    # -------------------------------------------------------------------------

    def report(self, status: str) -> rpt.RunReport:
        m, inst = self.module, self.inst
        threads = []
        for thread in inst.threads:
            end_ns = thread.end_ns if thread.end_ns is not None else thread.clock_ns
            if thread.killed:
                thread_status = "killed"
            else:
                thread_status = thread.status.value
            threads.append(rpt.ThreadReport(
                tid=thread.tid, function=m.func_name(thread.entry), device=thread.device,
                status=thread_status, result=thread.result, instructions=thread.instructions,
                start_ns=thread.start_ns, end_ns=end_ns, compute_ns=thread.compute_ns,
                memory_stall_ns=thread.memory_stall_ns, compile_ns=thread.compile_ns,
                join_wait_ns=thread.join_wait_ns,
            ))
        plan = [
            rpt.PlanReport(function=m.func_name(idx), device=entry.device,
                           device_class=entry.device_class.value, source=entry.source, rationale=entry.rationale)
            for idx, entry in sorted(self.plan.entries.items())
        ]
        migrations = [rpt.MigrationReport(**vars(rec)) for rec in self.migrations]
        migration_ns = sum(rec.cost_ns for rec in self.migrations)
        trap = None
        if inst.trap is not None:
            tid, kind, detail = inst.trap
            trap = rpt.TrapReport(tid=tid, kind=kind.value, detail=detail)

        clean = status == rpt.OK or (status == rpt.EXITED and inst.exit_code == 0)
        return rpt.RunReport(
            mode=self.cfg.mode.value,
            quantum=self.cfg.quantum,
            seed=self.cfg.seed,
            exit_status=status,
            exit_code=0 if clean else 1,
            guest_exit_code=inst.exit_code,
            trap=trap,
            plan=plan,
            threads=threads,
            migrations=migrations,
            epochs=self.epochs,
            aot_compile_ns=self.compile.aot_compile_ns,
            jit_compile_ns=sum(t.compile_ns for t in inst.threads),
            total_compute_ns=sum(t.compute_ns for t in inst.threads),
            total_memory_stall_ns=sum(t.memory_stall_ns for t in inst.threads),
            total_migration_ns=migration_ns,
            total_simulated_ns=max((r.end_ns for r in threads), default=0.0) + migration_ns,
            memory_digest=hashlib.sha256(inst.memory.data).hexdigest(),
            outputs={str(fd): bytes(data).decode("utf-8", errors="replace")
                     for fd, data in sorted(inst.host.outputs.items())},
        )


def run(m: Module, t: Topology, cfg: Optional[RunConfig] = None, env: Optional[HostEnv] = None) -> rpt.RunReport:
    """Run a module to completion and return its report."""
    return Runner(m, t, cfg, env).run()
