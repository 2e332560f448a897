"""codeflow Configuration.

All configuration comes from environment variables (a .env file is honoured).
Per-run knobs (mode, quantum, migration) belong in RunConfig, these are only
the defaults they start from.
"""

import os
from dataclasses import dataclass

from dotenv import load_dotenv

load_dotenv()


@dataclass
class Settings:
    """Platform settings from environment."""

    # Logging
    log_level: str = os.getenv("CODEFLOW_LOG_LEVEL", "WARNING")

    # Program search (deployment programs, then built-ins)
    programs_dir: str = os.getenv("CODEFLOW_PROGRAMS_DIR", "programs")

    # Default topology for `run` when --topology is omitted
    topology: str = os.getenv("CODEFLOW_TOPOLOGY", "topologies/paper-shape.json")

    # Affinity detection
    r_threshold: float = float(os.getenv("CODEFLOW_R_THRESHOLD", "2.0"))

    # Scheduler / migration defaults
    quantum: int = int(os.getenv("CODEFLOW_QUANTUM", "1000"))
    epoch_instructions: int = int(os.getenv("CODEFLOW_EPOCH_INSTRUCTIONS", "10000"))
    hot_threshold: int = int(os.getenv("CODEFLOW_HOT_THRESHOLD", "64"))
    migration_overhead_ns: float = float(os.getenv("CODEFLOW_MIGRATION_OVERHEAD_NS", "1000"))

    # Interpreter limits (exceeding them traps with stack_exhausted)
    max_call_depth: int = int(os.getenv("CODEFLOW_MAX_CALL_DEPTH", "1024"))
    max_value_stack: int = int(os.getenv("CODEFLOW_MAX_VALUE_STACK", "65536"))

    # Host benchmarks
    bench_loads: int = int(os.getenv("CODEFLOW_BENCH_LOADS", "1000000"))
    bench_repeats: int = int(os.getenv("CODEFLOW_BENCH_REPEATS", "5"))


settings = Settings()
