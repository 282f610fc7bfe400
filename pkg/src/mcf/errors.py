"""Exception types shared across the workbench.

Every error carries a short machine-readable ``code`` (used in HTTP error
bodies), an ``exit_code`` for the CLI (2 = validation, 3 = conflict or a
blank halting evaluation), and an ``http_status``.
"""

from __future__ import annotations


class WorkbenchError(Exception):
    code = "error"
    exit_code = 2
    http_status = 400

    def __init__(self, message: str, *, path: str | None = None):
        super().__init__(message)
        self.path = path

    @property
    def message(self) -> str:
        return str(self)


class OutOfRange(WorkbenchError):
    code = "out_of_range"


class ScaleMismatch(WorkbenchError):
    code = "scale_mismatch"


class ArityMismatch(WorkbenchError):
    code = "arity_mismatch"


class NotOnGrid(WorkbenchError):
    code = "not_on_grid"


class Ambiguous(WorkbenchError):
    """A snap landed exactly midway between two grid levels."""

    code = "ambiguous_snap"


class DuplicateAxis(WorkbenchError):
    code = "duplicate_axis"


class WouldEraseExpertCells(WorkbenchError):
    """Marking a region meaningless would erase specified/overridden cells."""

    code = "would_erase_expert_cells"
    exit_code = 3
    http_status = 409

    def __init__(self, message: str, indices: list[tuple[int, ...]]):
        super().__init__(message)
        self.indices = indices


class CornerUndefined(WorkbenchError):
    code = "corner_undefined"


class MissingCorners(WorkbenchError):
    code = "missing_corners"

    def __init__(self, message: str, corners: list[tuple[int, ...]]):
        super().__init__(message)
        self.corners = corners


class BadWeights(WorkbenchError):
    code = "bad_weights"

    def __init__(self, message: str, total: float | None = None):
        super().__init__(message)
        self.total = total


class ParseError(WorkbenchError):
    code = "parse_error"

    def __init__(self, message: str, line: int, column: int, expected: list[str]):
        super().__init__(message)
        self.line = line
        self.column = column
        self.expected = expected


class UnknownProposition(WorkbenchError):
    code = "unknown_proposition"


class EqualityOffGrid(WorkbenchError):
    code = "equality_off_grid"

    def __init__(self, message: str, level: float):
        super().__init__(message)
        self.level = level


class ConflictsPresent(WorkbenchError):
    code = "conflicts_present"
    exit_code = 3
    http_status = 409

    def __init__(self, message: str, conflicts: list):
        super().__init__(message)
        self.conflicts = conflicts


class MissingEvidence(WorkbenchError):
    code = "missing_evidence"

    def __init__(self, message: str, propositions: list[str]):
        super().__init__(message)
        self.propositions = propositions


class BlankEncountered(WorkbenchError):
    """Evaluation hit a blank cell and the blank policy could not continue."""

    code = "blank_encountered"
    exit_code = 3
    http_status = 409

    def __init__(self, message: str, table_id: str | None = None,
                 index: tuple[int, ...] | None = None):
        super().__init__(message)
        self.table_id = table_id
        self.index = index


class CycleDetected(WorkbenchError):
    code = "cycle_detected"

    def __init__(self, message: str, cycle: list[str]):
        super().__init__(message)
        self.cycle = cycle


class AmbiguousCorroboration(WorkbenchError):
    code = "ambiguous_corroboration"


class RuleStrengthMismatch(WorkbenchError):
    """A rule's declared strength disagrees with its all-true corner."""

    code = "rule_strength_mismatch"


class NotEvaluated(WorkbenchError):
    code = "not_evaluated"
    http_status = 404


class NotRevertible(WorkbenchError):
    code = "not_revertible"
    exit_code = 3
    http_status = 409

    def __init__(self, message: str, conflicting_entries: list[str]):
        super().__init__(message)
        self.conflicting_entries = conflicting_entries


class ShapeMismatch(WorkbenchError):
    code = "shape_mismatch"


class SchemaError(WorkbenchError):
    code = "schema_error"

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}", path=path)
        self.reason = reason


class VersionUnsupported(WorkbenchError):
    code = "version_unsupported"


class UnknownId(WorkbenchError):
    code = "unknown_id"
    http_status = 404


class StaleJournalHead(WorkbenchError):
    """Optimistic-concurrency check failed: the journal moved underneath."""

    code = "stale_journal_head"
    exit_code = 3
    http_status = 409


class BindFailure(WorkbenchError):
    code = "bind_failure"
