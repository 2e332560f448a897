"""Exception hierarchy.

Guest faults (a program dividing by zero, loading out of bounds) are not
exceptions - the interpreter reports them as a TrapKind in its StepOutcome.
Everything here is a host-side failure: bad program text, bad topology,
bad configuration, or a violated precondition.
"""

from typing import Optional


class CodeflowError(Exception):
    """Base class for every error raised by codeflow."""


class ConfigError(CodeflowError):
    """Invalid run configuration (flags, config file, placement choice)."""


# =============================================================================
# Program text
# =============================================================================

class CftError(CodeflowError):
    """Base class for program text errors."""


class CftSyntaxError(CftError):
    """Located parse error. line/col are 1-based."""

    def __init__(self, line: int, col: int, message: str):
        self.line = line
        self.col = col
        self.message = message
        super().__init__(f"{line}:{col}: {message}")


class UnknownOpcode(CftSyntaxError):
    """Instruction outside the closed opcode set."""


class UnknownImport(CftSyntaxError):
    """Import missing from the host registry, or with a mismatched signature."""


class DuplicateExport(CftSyntaxError):
    """Two exports with the same name."""


class MissingExport(CftSyntaxError):
    """The module has no "main" export."""


class ModuleRejected(CftError):
    """Module carries error-severity validation findings."""

    def __init__(self, report):
        self.report = report
        rules = ", ".join(sorted({f.rule for f in report.errors}))
        super().__init__(f"module rejected by validation: {rules}")


# =============================================================================
# Topology
# =============================================================================

class TopologyError(CodeflowError):
    """Base class for topology errors."""


class SchemaError(TopologyError):
    """Topology document does not match the schema."""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class DanglingReference(TopologyError):
    """A device, override or local_region names an id that does not exist."""

    def __init__(self, ref_id: Optional[str], context: str = ""):
        self.ref_id = ref_id
        detail = f" ({context})" if context else ""
        super().__init__(f"dangling reference: {ref_id!r}{detail}")


class UnknownDevice(TopologyError):
    """Device id not present in the topology."""


class UnknownRegion(TopologyError):
    """Region id not present in the topology."""


# =============================================================================
# Engine / runtime
# =============================================================================

class EngineError(CodeflowError):
    """Base class for instantiation errors."""


class PlacementIncomplete(EngineError):
    """Some page of the initial memory has no region assigned."""


class ImportNotSatisfied(EngineError):
    """An import has no registered host function."""


class ScheduleError(CodeflowError):
    """Base class for scheduling errors."""


class NoSchedulableDevice(ScheduleError):
    """The topology has no cpu-class device to fall back to."""


# =============================================================================
# Host benchmarks
# =============================================================================

class BenchError(CodeflowError):
    """Base class for benchmark errors."""


class BadGeometry(BenchError):
    """Size/stride combination violates the chase buffer invariants."""


class BenchPreconditionError(BenchError):
    """A measurement was requested with out-of-range parameters."""
