"""Runtime - schedule, compile-cost model, round-robin execution and migration."""

from codeflow.runtime.compile import CompileSchedule, compile_cost
from codeflow.runtime.config import (
    FIRST_REGION,
    CompileMode,
    MigrationPolicy,
    RunConfig,
    load_run_config,
    make_run_config,
)
from codeflow.runtime.migration import MigrationRecord, epoch_migrate
from codeflow.runtime.programs import find_program, list_programs, load_program
from codeflow.runtime.report import RunReport
from codeflow.runtime.runner import Runner, StepRecord, initial_placement, run
from codeflow.runtime.scheduler import FALLBACK_CPU, PlanEntry, SchedulePlan, schedule

__all__ = [
    "CompileSchedule",
    "compile_cost",
    "FIRST_REGION",
    "CompileMode",
    "MigrationPolicy",
    "RunConfig",
    "load_run_config",
    "make_run_config",
    "MigrationRecord",
    "epoch_migrate",
    "find_program",
    "list_programs",
    "load_program",
    "RunReport",
    "Runner",
    "StepRecord",
    "initial_placement",
    "run",
    "FALLBACK_CPU",
    "PlanEntry",
    "SchedulePlan",
    "schedule",
]
