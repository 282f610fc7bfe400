"""Expert modification mechanisms with journaling.

Three levels of intervention, coarsest last: override individual cells or
blocks (local, surgical), edit a corner of the categorical table (rederives
the interior), swap the interpolating function (global). Every mutation is
journaled with enough prior state to revert it exactly. Overrides survive
re-derivation; derived values are defaults, expert values are authoritative.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence

from .errors import CornerUndefined, NotRevertible, OutOfRange
from .interpolate import Interpolator, recompute_derived
from .tables import (
    Cell,
    CellChange,
    CombiningTable,
    Provenance,
    Region,
    corner_index,
    corner_view,
    derived,
    overridden,
    region_indices,
    specified,
)

KIND_SET_CELL = "set_cell"
KIND_OVERRIDE_CELL = "override_cell"
KIND_OVERRIDE_BLOCK = "override_block"
KIND_EDIT_CORNER = "edit_corner"
KIND_SWAP_INTERPOLATOR = "swap_interpolator"
KIND_MARK_MEANINGLESS = "mark_meaningless"
KIND_DERIVE = "derive"
KIND_APPLY_RULES = "apply_rules"
KIND_CLEAR_OVERRIDE = "clear_override"
KIND_REVERT = "revert"

ENTRY_KINDS = (
    KIND_SET_CELL, KIND_OVERRIDE_CELL, KIND_OVERRIDE_BLOCK, KIND_EDIT_CORNER,
    KIND_SWAP_INTERPOLATOR, KIND_MARK_MEANINGLESS, KIND_DERIVE,
    KIND_APPLY_RULES, KIND_CLEAR_OVERRIDE, KIND_REVERT,
)


@dataclass(frozen=True)
class JournalEntry:
    """One journaled mutation. The recorded before-states are sufficient
    to revert the entry exactly."""

    id: str
    timestamp: str
    author: str
    kind: str
    table_id: str | None
    payload: Mapping[str, object]
    changes: tuple[CellChange, ...]


# CellDiff in reports is the same shape as a journaled change
CellDiff = CellChange


def now_stamp() -> str:
    return (datetime.now(timezone.utc)
            .isoformat(timespec="seconds")
            .replace("+00:00", "Z"))


def make_entry(kind: str, table_id: str | None, payload: Mapping[str, object],
               changes: Iterable[CellChange], *, entry_id: str,
               author: str = "expert", timestamp: str | None = None) -> JournalEntry:
    if kind not in ENTRY_KINDS:
        raise OutOfRange(f"unknown journal entry kind {kind!r}")
    return JournalEntry(entry_id, timestamp or now_stamp(), author, kind,
                        table_id, dict(payload), tuple(changes))


def _region_payload(region: Region) -> list:
    return [None if sel is None else list(sel) for sel in region.selections]


def _table_diff(before: CombiningTable, after: CombiningTable) -> list[CellChange]:
    return [
        CellChange(ix, before.cell(ix), after.cell(ix))
        for ix in before.indices()
        if before.cell(ix) != after.cell(ix)
    ]


def override_cell(table: CombiningTable, index: tuple[int, ...], value: float,
                  note: str | None = None, *, entry_id: str = "adhoc",
                  author: str = "expert", timestamp: str | None = None,
                  ) -> tuple[CombiningTable, JournalEntry]:
    """Store the expert's value on top of whatever the cell held."""
    index = tuple(index)
    value = float(value)
    if not table.conclusion_scale.contains(value):
        raise OutOfRange(f"{value} outside the conclusion scale of {table.id!r}")
    before = table.cell(index)
    after = overridden(value, entry_id, note)
    table = table.with_cells({index: after})
    entry = make_entry(
        KIND_OVERRIDE_CELL, table.id,
        {"index": list(index), "value": value, "note": note},
        [CellChange(index, before, after)],
        entry_id=entry_id, author=author, timestamp=timestamp,
    )
    return table, entry


def override_block(table: CombiningTable, region: Region, value: float,
                   note: str | None = None, *, entry_id: str = "adhoc",
                   author: str = "expert", timestamp: str | None = None,
                   ) -> tuple[CombiningTable, JournalEntry]:
    """Override every cell in a region with one value, one journal entry.
    An empty region changes nothing but is still journaled."""
    value = float(value)
    if not table.conclusion_scale.contains(value):
        raise OutOfRange(f"{value} outside the conclusion scale of {table.id!r}")
    changes = []
    updates = {}
    for ix in region_indices(table.axes, region):
        before = table.cell(ix)
        after = overridden(value, entry_id, note)
        if before != after:
            updates[ix] = after
            changes.append(CellChange(ix, before, after))
    table = table.with_cells(updates)
    entry = make_entry(
        KIND_OVERRIDE_BLOCK, table.id,
        {"region": _region_payload(region), "value": value, "note": note},
        changes, entry_id=entry_id, author=author, timestamp=timestamp,
    )
    return table, entry


def edit_corner(table: CombiningTable, corner: tuple[int, ...], value: float,
                interp: Interpolator, note: str | None = None, *,
                entry_id: str = "adhoc", author: str = "expert",
                timestamp: str | None = None,
                ) -> tuple[CombiningTable, JournalEntry]:
    """Change a categorical (corner) value and rederive the interior.

    Only Derived cells are recomputed; Specified, Overridden, and
    IntendedBlank cells are untouched.
    """
    corner = tuple(corner)
    index = corner_index(table, corner)
    current = table.cell(index)
    if current.state not in (Provenance.SPECIFIED, Provenance.DERIVED):
        raise CornerUndefined(
            f"corner {corner} of table {table.id!r} is "
            f"{current.state.name}; only Specified or Derived corners are editable"
        )
    value = float(value)
    if not table.conclusion_scale.contains(value):
        raise OutOfRange(f"{value} outside the conclusion scale of {table.id!r}")
    edited = table.with_cells({index: specified(value, note)})
    rederived = recompute_derived(edited, corner_view(edited), interp)
    changes = _table_diff(table, rederived)
    entry = make_entry(
        KIND_EDIT_CORNER, table.id,
        {"corner": list(corner), "value": value, "interpolator": interp.id,
         "note": note},
        changes, entry_id=entry_id, author=author, timestamp=timestamp,
    )
    return rederived, entry


def swap_interpolator(table: CombiningTable, new_interp: Interpolator, *,
                      entry_id: str = "adhoc", author: str = "expert",
                      timestamp: str | None = None,
                      ) -> tuple[CombiningTable, JournalEntry, int]:
    """Recompute every Derived cell with a different interpolator.

    Returns the changed-cell count as an explicit warning figure: unlike a
    cell override, this is a global edit.
    """
    rederived = recompute_derived(table, corner_view(table), new_interp)
    changes = _table_diff(table, rederived)
    entry = make_entry(
        KIND_SWAP_INTERPOLATOR, table.id,
        {"interpolator": new_interp.id, "changed": len(changes)},
        changes, entry_id=entry_id, author=author, timestamp=timestamp,
    )
    return rederived, entry, len(changes)


def clear_override(table: CombiningTable, index: tuple[int, ...],
                   interp: Interpolator, *, entry_id: str = "adhoc",
                   author: str = "expert", timestamp: str | None = None,
                   ) -> tuple[CombiningTable, JournalEntry]:
    """Return an Overridden cell to Derived by recomputing it. The only
    way back: un-overriding is itself an expert act worth journaling."""
    index = tuple(index)
    before = table.cell(index)
    if before.state is not Provenance.OVERRIDDEN:
        raise OutOfRange(
            f"cell {index} of table {table.id!r} is {before.state.name}, "
            "not Overridden"
        )
    value = interp.value_at(corner_view(table), table.levels_at(index))
    after = derived(value, interp.id)
    table = table.with_cells({index: after})
    entry = make_entry(
        KIND_CLEAR_OVERRIDE, table.id,
        {"index": list(index), "interpolator": interp.id},
        [CellChange(index, before, after)],
        entry_id=entry_id, author=author, timestamp=timestamp,
    )
    return table, entry


def diff(a: CombiningTable, b: CombiningTable) -> list[CellDiff]:
    """Row-major list of cells whose state differs (value or provenance)."""
    if a.axes != b.axes:
        raise OutOfRange("diff needs tables over identical axes")
    return _table_diff(a, b)


def invert_changes(changes: Sequence[CellChange]) -> tuple[CellChange, ...]:
    return tuple(CellChange(c.index, c.after, c.before) for c in changes)


def conflicting_later_entries(journal: Sequence[JournalEntry],
                              entry_id: str) -> list[str]:
    """Entry ids after the given entry that touch any of the same cells
    (or re-bind the same table's interpolator). Nonempty means the entry
    is not the latest toucher and reverting it would corrupt history."""
    position = next(
        (i for i, e in enumerate(journal) if e.id == entry_id), None
    )
    if position is None:
        raise NotRevertible(f"no journal entry {entry_id!r}", [])
    target = journal[position]
    touched = {(target.table_id, c.index) for c in target.changes}
    binds = "binding_after" in target.payload
    conflicts = []
    for later in journal[position + 1:]:
        if later.table_id != target.table_id:
            continue
        overlap = any((later.table_id, c.index) in touched for c in later.changes)
        rebinds = binds and "binding_after" in later.payload
        if overlap or rebinds:
            conflicts.append(later.id)
    return conflicts
