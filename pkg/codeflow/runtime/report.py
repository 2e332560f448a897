"""RunReport - the machine-readable result of one run.

Field order is the JSON key order. No timestamps or host-dependent values,
so identical runs serialize to identical bytes.
"""

from typing import Optional

from pydantic import BaseModel

OK = "ok"
EXITED = "exited"
TRAPPED = "trapped"
DEADLOCK = "deadlock"
INSTRUCTION_LIMIT = "instruction_limit"


class ThreadReport(BaseModel):
    tid: int
    function: str
    device: str
    status: str
    result: Optional[int]
    instructions: int
    start_ns: float
    end_ns: float
    compute_ns: float
    memory_stall_ns: float
    compile_ns: float
    join_wait_ns: float


class PlanReport(BaseModel):
    function: str
    device: str
    device_class: str
    source: str
    rationale: str


class MigrationReport(BaseModel):
    epoch: int
    page: int
    device: str
    from_region: str
    to_region: str
    cost_ns: float


class TrapReport(BaseModel):
    tid: int
    kind: str
    detail: str


class RunReport(BaseModel):
    mode: str
    quantum: int
    seed: int
    exit_status: str
    exit_code: int
    guest_exit_code: Optional[int] = None
    trap: Optional[TrapReport] = None
    plan: list[PlanReport]
    threads: list[ThreadReport]
    migrations: list[MigrationReport]
    epochs: int
    aot_compile_ns: float
    jit_compile_ns: float
    total_compute_ns: float
    total_memory_stall_ns: float
    total_migration_ns: float
    total_simulated_ns: float
    memory_digest: str
    outputs: dict[str, str]

    def to_json(self) -> str:
        return self.model_dump_json(indent=2) + "\n"
