"""
Exception hierarchy for the scheduling pipeline
"""

from typing import Optional


class SchedulingError(Exception):
    """Base class for every error raised by the scheduling system"""

    exit_code = 3


class DatasetError(SchedulingError):
    """Problem with the case input files"""

    exit_code = 1


class DatasetParseError(DatasetError):
    """Malformed dataset file"""

    def __init__(self, path: str, line: Optional[int], message: str):
        self.path = path
        self.line = line
        location = f"{path}:{line}" if line is not None else path
        super().__init__(f"{location}: {message}")


class DatasetValidationError(DatasetError):
    """An entity violates one of its invariants"""

    def __init__(self, entity: str, message: str):
        self.entity = entity
        super().__init__(f"{entity}: {message}")


class DatasetReferenceError(DatasetError):
    """An entity points at a bus (or unit) that does not exist"""

    def __init__(self, entity: str, reference: str):
        self.entity = entity
        self.reference = reference
        super().__init__(f"{entity}: dangling reference to {reference}")


class TopologyError(DatasetError):
    """The line set is not a radial tree rooted at the substation"""


class CycleError(TopologyError):
    pass


class DisconnectedBusError(TopologyError):
    pass


class ScenarioError(SchedulingError):
    """Invalid scenario specification or probabilities"""

    exit_code = 1


class ModelBuildError(SchedulingError):
    """The optimization model cannot be built from the given inputs"""


class StructuralError(ModelBuildError):
    """A lower-level LP is structurally malformed (e.g. empty column)"""


class IndexSetMismatchError(ModelBuildError):
    """Blocks built over inconsistent index sets"""


class SolverError(SchedulingError):
    """The solver failed"""


class NumericalInstabilityError(SolverError):
    """Near-singular pivots left a basis that fails its optimality checks"""

    exit_code = 2


class SolverLimitError(SolverError):
    """Node or time budget exhausted before optimality was proven"""

    exit_code = 2


class SolutionImportError(SchedulingError):
    """An external solution file cannot be accepted"""

    exit_code = 1


class UnknownColumnError(SolutionImportError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown column '{name}' in solution file")


class MissingColumnError(SolutionImportError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"solution file has no value for column '{name}'")


class InfeasibleSolutionError(SolutionImportError):
    def __init__(self, row: str, violation: float):
        self.row = row
        self.violation = violation
        super().__init__(f"solution violates '{row}' by {violation:.3e}")


class InvariantViolation(SchedulingError):
    """A post-solve consistency check failed"""

    exit_code = 3


class StageError(SchedulingError):
    """Wraps an error with the name of the pipeline stage that raised it"""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, 'exit_code', 3)
        super().__init__(f"[{stage}] {cause}")
