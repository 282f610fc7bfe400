"""Combining tables: dense N-dimensional grids of five-state cells.

A cell is Unspecified (never considered), IntendedBlank (considered and
deliberately left empty), Specified (expert-entered), Derived (filled by an
interpolator), or Overridden (expert correction on top of a derived table).
Blank cells and zero cells represent different events, so blanks are never
coerced to numbers here; what a blank means at inference time is the
engine's policy decision.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Mapping

from .beliefs import (
    LEVEL_TOL,
    Axis,
    BeliefScale,
    BeliefValue,
    LocateMode,
    axis_value,
    locate,
)
from .errors import (
    ArityMismatch,
    DuplicateAxis,
    MissingCorners,
    NotOnGrid,
    OutOfRange,
    ShapeMismatch,
    WouldEraseExpertCells,
)


class Provenance(str, Enum):
    UNSPECIFIED = "U"
    INTENDED_BLANK = "M"
    SPECIFIED = "S"
    DERIVED = "D"
    OVERRIDDEN = "O"


_BLANK_STATES = (Provenance.UNSPECIFIED, Provenance.INTENDED_BLANK)


@dataclass(frozen=True)
class Cell:
    state: Provenance
    value: float | None = None
    note: str | None = None
    interpolator: str | None = None
    entry: str | None = None

    def __post_init__(self):
        s = self.state
        if s in _BLANK_STATES and self.value is not None:
            raise OutOfRange(f"{s.name} cell cannot carry a value")
        if s not in _BLANK_STATES and self.value is None:
            raise OutOfRange(f"{s.name} cell needs a value")
        if s is Provenance.DERIVED and not self.interpolator:
            raise OutOfRange("Derived cell needs the interpolator that produced it")
        if s is not Provenance.DERIVED and self.interpolator is not None:
            raise OutOfRange(f"{s.name} cell cannot carry an interpolator id")
        if s is Provenance.OVERRIDDEN and not self.entry:
            raise OutOfRange("Overridden cell needs its journal entry id")
        if s is not Provenance.OVERRIDDEN and self.entry is not None:
            raise OutOfRange(f"{s.name} cell cannot carry a journal entry id")

    @property
    def is_blank(self) -> bool:
        return self.state in _BLANK_STATES


UNSPECIFIED_CELL = Cell(Provenance.UNSPECIFIED)
INTENDED_BLANK_CELL = Cell(Provenance.INTENDED_BLANK)


@dataclass(frozen=True)
class CellChange:
    """One cell's transition, enough to report and to undo."""

    index: tuple[int, ...]
    before: Cell
    after: Cell


def specified(value: float, note: str | None = None) -> Cell:
    return Cell(Provenance.SPECIFIED, float(value), note=note)


def derived(value: float, interpolator: str) -> Cell:
    return Cell(Provenance.DERIVED, float(value), interpolator=interpolator)


def overridden(value: float, entry: str, note: str | None = None) -> Cell:
    return Cell(Provenance.OVERRIDDEN, float(value), note=note, entry=entry)


@dataclass(frozen=True)
class CombiningTable:
    """Dense N-dimensional combining table. Every mutator returns a new
    table value; concurrent readers need no coordination."""

    id: str
    axes: tuple[Axis, ...]
    conclusion: str
    conclusion_scale: BeliefScale
    cells: tuple[Cell, ...]

    def __post_init__(self):
        if not self.id:
            raise OutOfRange("table needs an id")
        if not self.axes:
            raise OutOfRange("table needs at least one axis")
        seen = set()
        for axis in self.axes:
            if axis.proposition in seen:
                raise DuplicateAxis(f"duplicate axis {axis.proposition!r}")
            seen.add(axis.proposition)
        expected = 1
        for axis in self.axes:
            expected *= len(axis)
        if len(self.cells) != expected:
            raise ShapeMismatch(
                f"table {self.id!r} needs {expected} cells, got {len(self.cells)}"
            )
        for cell in self.cells:
            if cell.value is not None and not self.conclusion_scale.contains(cell.value):
                raise OutOfRange(
                    f"cell value {cell.value} outside the conclusion scale of "
                    f"table {self.id!r}"
                )

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(axis) for axis in self.axes)

    @property
    def size(self) -> int:
        return len(self.cells)

    def offset(self, index: tuple[int, ...]) -> int:
        if len(index) != len(self.axes):
            raise ArityMismatch(
                f"index arity {len(index)} does not match table arity {len(self.axes)}"
            )
        flat = 0
        for i, axis in zip(index, self.axes):
            if not 0 <= i < len(axis):
                raise OutOfRange(f"index {index} outside table shape {self.shape}")
            flat = flat * len(axis) + i
        return flat

    def cell(self, index: tuple[int, ...]) -> Cell:
        return self.cells[self.offset(index)]

    def levels_at(self, index: tuple[int, ...]) -> tuple[float, ...]:
        self.offset(index)
        return tuple(axis.levels[i] for i, axis in zip(index, self.axes))

    def indices(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(*(range(len(axis)) for axis in self.axes))

    def with_cells(self, updates: Mapping[tuple[int, ...], Cell]) -> "CombiningTable":
        cells = list(self.cells)
        for index, cell in updates.items():
            cells[self.offset(index)] = cell
        return CombiningTable(
            self.id, self.axes, self.conclusion, self.conclusion_scale, tuple(cells)
        )


def new_table(table_id: str, axes: Iterable[Axis], conclusion: str,
              conclusion_scale: BeliefScale) -> CombiningTable:
    """Fresh table with every cell Unspecified."""
    axes = tuple(axes)
    count = 1
    for axis in axes:
        count *= len(axis)
    return CombiningTable(
        table_id, axes, conclusion, conclusion_scale, (UNSPECIFIED_CELL,) * count
    )


def set_specified(table: CombiningTable, index: tuple[int, ...], value: float,
                  note: str | None = None) -> CombiningTable:
    value = float(value)
    if not table.conclusion_scale.contains(value):
        raise OutOfRange(
            f"{value} outside the conclusion scale of table {table.id!r}"
        )
    return table.with_cells({tuple(index): specified(value, note)})


@dataclass(frozen=True)
class Region:
    """Per-axis selection of grid levels; None selects the whole axis.

    Selections are stored as resolved level values in axis order
    (descending), so a Region is independent of the predicate sugar that
    built it.
    """

    selections: tuple[tuple[float, ...] | None, ...]


def make_region(axes: Iterable[Axis], spec: Mapping[str, object]) -> Region:
    """Build a Region from per-proposition predicates.

    Predicate forms, keyed by proposition id (absent or None means any
    level): a bare number selects one exact grid level; ("<=", x) and
    (">=", x) select all qualifying levels, the threshold itself may be off
    grid; ("=", x) is the explicit exact form; an iterable of numbers is a
    member-of set. Exact levels that are not on the axis fail here, never
    later.
    """
    axes = tuple(axes)
    known = {axis.proposition for axis in axes}
    for prop in spec:
        if prop not in known:
            raise NotOnGrid(f"region references unknown proposition {prop!r}")

    selections: list[tuple[float, ...] | None] = []
    for axis in axes:
        pred = spec.get(axis.proposition)
        if pred is None:
            selections.append(None)
            continue
        if isinstance(pred, (int, float)):
            pred = ("=", float(pred))
        if isinstance(pred, tuple) and len(pred) == 2 and pred[0] in ("=", "<=", ">="):
            op, threshold = pred[0], float(pred[1])
            if op == "=":
                i = locate(axis, threshold, LocateMode.EXACT)
                selections.append((axis.levels[i],))
            elif op == "<=":
                selections.append(tuple(
                    lv for lv in axis.levels if lv <= threshold + LEVEL_TOL
                ))
            else:
                selections.append(tuple(
                    lv for lv in axis.levels if lv >= threshold - LEVEL_TOL
                ))
            continue
        if isinstance(pred, Iterable):
            picked = []
            for raw in pred:
                i = locate(axis, float(raw), LocateMode.EXACT)
                picked.append(axis.levels[i])
            # canonical order: descending, like the axis itself
            selections.append(tuple(sorted(set(picked), reverse=True)))
            continue
        raise NotOnGrid(
            f"unsupported region predicate {pred!r} for {axis.proposition!r}"
        )
    return Region(tuple(selections))


def region_indices(axes: Iterable[Axis], region: Region) -> list[tuple[int, ...]]:
    """All grid indices matched by the region, row-major."""
    axes = tuple(axes)
    if len(region.selections) != len(axes):
        raise ShapeMismatch(
            f"region arity {len(region.selections)} does not match {len(axes)} axes"
        )
    per_axis: list[list[int]] = []
    for axis, sel in zip(axes, region.selections):
        if sel is None:
            per_axis.append(list(range(len(axis))))
        else:
            picked = [locate(axis, lv, LocateMode.EXACT) for lv in sel]
            per_axis.append(sorted(set(picked)))
    return [tuple(ix) for ix in itertools.product(*per_axis)]


def region_cells(table: CombiningTable,
                 region: Region) -> list[tuple[tuple[int, ...], Cell]]:
    return [(ix, table.cell(ix)) for ix in region_indices(table.axes, region)]


def mark_meaningless(table: CombiningTable, region: Region) -> CombiningTable:
    """Blank out a region. Expert data is never silently erased: any
    Specified or Overridden cell in the region aborts the whole operation."""
    matched = region_cells(table, region)
    protected = [
        ix for ix, cell in matched
        if cell.state in (Provenance.SPECIFIED, Provenance.OVERRIDDEN)
    ]
    if protected:
        raise WouldEraseExpertCells(
            f"region covers {len(protected)} expert-entered cell(s)", protected
        )
    updates = {
        ix: INTENDED_BLANK_CELL for ix, cell in matched
        if cell.state in (Provenance.UNSPECIFIED, Provenance.DERIVED)
    }
    return table.with_cells(updates)


class LookupMode(Enum):
    EXACT = "exact"
    SNAP = "snap"
    CONTINUOUS = "continuous"


@dataclass(frozen=True)
class Contributor:
    index: tuple[int, ...]
    weight: float
    cell: Cell


@dataclass(frozen=True)
class LookupResult:
    """Outcome of a table lookup. Either a value (with provenance for
    grid hits; a Continuous blend has no single provenance) or a blank,
    which is never coerced to a number by this module."""

    value: float | None
    provenance: Provenance | None
    blank: bool
    blank_reason: Provenance | None
    mode: LookupMode
    contributors: tuple[Contributor, ...]

    @property
    def is_value(self) -> bool:
        return not self.blank


def _blend_weights(axis: Axis, raw: float) -> list[tuple[int, float]]:
    bracket = locate(axis, raw, LocateMode.BRACKET)
    i, j = bracket
    if i == j:
        return [(i, 1.0)]
    hi, lo = axis.levels[i], axis.levels[j]
    w_hi = (raw - lo) / (hi - lo)
    return [(i, w_hi), (j, 1.0 - w_hi)]


def lookup(table: CombiningTable, point: Iterable[BeliefValue | float],
           mode: LookupMode) -> LookupResult:
    """Resolve a point to a LookupResult.

    Exact and Snap locate every coordinate to one grid level and return
    that cell's state. Continuous brackets each coordinate and blends the
    2^N surrounding cells multilinearly; if any surrounding cell is blank
    the result is blank, because a made-up number would defeat the point
    of leaving the cell empty.
    """
    point = tuple(point)
    if len(point) != len(table.axes):
        raise ArityMismatch(
            f"point arity {len(point)} does not match table arity {len(table.axes)}"
        )

    if mode in (LookupMode.EXACT, LookupMode.SNAP):
        locate_mode = LocateMode.EXACT if mode is LookupMode.EXACT else LocateMode.SNAP
        index = tuple(locate(axis, p, locate_mode)
                      for axis, p in zip(table.axes, point))
        cell = table.cell(index)
        contributors = (Contributor(index, 1.0, cell),)
        if cell.is_blank:
            return LookupResult(None, None, True, cell.state, mode, contributors)
        return LookupResult(cell.value, cell.state, False, None, mode, contributors)

    per_axis = [_blend_weights(axis, axis_value(axis, p))
                for axis, p in zip(table.axes, point)]
    contributors = []
    for combo in itertools.product(*per_axis):
        index = tuple(i for i, _ in combo)
        weight = 1.0
        for _, w in combo:
            weight *= w
        contributors.append(Contributor(index, weight, table.cell(index)))
    contributors.sort(key=lambda c: c.index)
    for c in contributors:
        if c.cell.is_blank:
            return LookupResult(
                None, None, True, c.cell.state, mode, tuple(contributors)
            )
    value = sum(c.weight * c.cell.value for c in contributors)
    return LookupResult(value, None, False, None, mode, tuple(contributors))


@dataclass(frozen=True)
class CategoricalTable:
    """The 2^N corner cells: conclusion beliefs given certain evidence.
    A missing corner (value None) records that nothing is known there."""

    arity: int
    corners: Mapping[tuple[int, ...], float | None]

    def __post_init__(self):
        if self.arity < 1:
            raise OutOfRange("categorical table needs arity >= 1")
        expected = set(itertools.product((1, 0), repeat=self.arity))
        if set(self.corners) != expected:
            raise ShapeMismatch(
                f"categorical table of arity {self.arity} needs exactly "
                f"{2 ** self.arity} corners"
            )

    @property
    def complete(self) -> bool:
        return all(v is not None for v in self.corners.values())

    def missing(self) -> list[tuple[int, ...]]:
        return [c for c in corner_order(self.arity) if self.corners[c] is None]

    def value(self, corner: tuple[int, ...]) -> float:
        v = self.corners.get(tuple(corner))
        if v is None:
            raise MissingCorners(f"corner {corner} is missing", [tuple(corner)])
        return v

    def with_corner(self, corner: tuple[int, ...],
                    value: float | None) -> "CategoricalTable":
        corners = dict(self.corners)
        if tuple(corner) not in corners:
            raise ShapeMismatch(f"{corner} is not a corner of arity {self.arity}")
        corners[tuple(corner)] = None if value is None else float(value)
        return CategoricalTable(self.arity, corners)


def corner_order(arity: int) -> list[tuple[int, ...]]:
    """Canonical corner listing: all-true first, all-false last."""
    return list(itertools.product((1, 0), repeat=arity))


def make_categorical(corners: Mapping[tuple[int, ...], float | None]) -> CategoricalTable:
    fixed = {tuple(c): (None if v is None else float(v)) for c, v in corners.items()}
    if not fixed:
        raise ShapeMismatch("categorical table needs at least one corner")
    arity = len(next(iter(fixed)))
    return CategoricalTable(arity, fixed)


def corner_index(table: CombiningTable, corner: tuple[int, ...]) -> tuple[int, ...]:
    """Grid index of a corner: bit 1 is the scale maximum (first level),
    bit 0 the scale minimum (last level)."""
    if len(corner) != len(table.axes):
        raise ArityMismatch(
            f"corner arity {len(corner)} does not match table arity {len(table.axes)}"
        )
    return tuple(0 if bit else len(axis) - 1
                 for bit, axis in zip(corner, table.axes))


def corner_view(table: CombiningTable) -> CategoricalTable:
    """Extract the 2^N extreme cells as a categorical table; blank corners
    map to missing."""
    corners: dict[tuple[int, ...], float | None] = {}
    for corner in corner_order(len(table.axes)):
        cell = table.cell(corner_index(table, corner))
        corners[corner] = cell.value
    return CategoricalTable(len(table.axes), corners)
