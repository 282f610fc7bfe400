"""The document: one self-contained JSON file per knowledge base.

A document bundles axes, combining tables, categorical tables,
interpolators, rule files, the inference network, corroboration specs, and
the journal. Every id referenced anywhere resolves within the document.
All mutations go through journaled methods here; replaying the journal
from the initial state reproduces the current document byte for byte.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import os
from typing import IO, Mapping

from . import revision, rules as rules_dsl
from .beliefs import (
    BIPOLAR,
    PROBABILITY,
    Axis,
    BeliefScale,
    BeliefValue,
    display_value,
    make_belief,
    scale_by_name,
)
from .engine import (
    BlankPolicy,
    CorroborationKind,
    CorroborationSpec,
    InferenceRule,
    InterpolatedCombiner,
    Proposition,
    TableCombiner,
    Trace,
    evaluate_network,
)
from .errors import (
    NotRevertible,
    OutOfRange,
    SchemaError,
    StaleJournalHead,
    UnknownId,
    UnknownProposition,
    VersionUnsupported,
    WorkbenchError,
)
from .interpolate import Interpolator, InterpolatorKind, derive_full
from .revision import (
    KIND_APPLY_RULES,
    KIND_CLEAR_OVERRIDE,
    KIND_DERIVE,
    KIND_EDIT_CORNER,
    KIND_MARK_MEANINGLESS,
    KIND_OVERRIDE_BLOCK,
    KIND_OVERRIDE_CELL,
    KIND_REVERT,
    KIND_SET_CELL,
    KIND_SWAP_INTERPOLATOR,
    JournalEntry,
    conflicting_later_entries,
    invert_changes,
    make_entry,
)
from .tables import (
    CategoricalTable,
    Cell,
    CellChange,
    CombiningTable,
    Provenance,
    Region,
    corner_order,
    make_region,
    mark_meaningless as _mark_meaningless_cells,
    set_specified,
)

SCHEMA_VERSION = "1.0.0"

_TOP_KEYS = ("version", "scales", "axes", "tables", "categorical",
             "interpolators", "rules", "network", "corroboration", "journal")

_SCALES = {"bipolar": BIPOLAR, "probability": PROBABILITY}


@dataclasses.dataclass(frozen=True)
class RuleSpec:
    """Document-level inference rule: references by id, resolved lazily."""

    id: str
    premises: tuple[str, ...]
    conclusion: str
    combiner_kind: str  # "table" | "interpolated"
    table: str | None = None
    categorical: str | None = None
    interpolator: str | None = None
    k: float | None = None


class Document:
    def __init__(self, version: str = SCHEMA_VERSION):
        self.version = version
        self.axes: dict[str, Axis] = {}
        self.tables: dict[str, CombiningTable] = {}
        self.categorical: dict[str, CategoricalTable] = {}
        self.interpolators: dict[str, Interpolator] = {}
        self.rules: dict[str, str] = {}
        self.propositions: dict[str, Proposition] = {}
        self.network_rules: list[RuleSpec] = []
        self.corroboration: dict[str, CorroborationSpec] = {}
        self.journal: list[JournalEntry] = []
        # (categorical-id, interpolator-id) last used to derive each table
        self.bindings: dict[str, tuple[str | None, str | None]] = {}
        # unknown JSON fields by path, preserved across save/load
        self.extras: dict[str, dict] = {}

    # ------------------------------------------------------------------
    # authoring

    def add_axis(self, axis: Axis) -> None:
        known = self.axes.get(axis.proposition)
        if known is not None and known != axis:
            raise SchemaError(
                f"axes.{axis.proposition}",
                "conflicting axis definitions for one proposition",
            )
        self.axes[axis.proposition] = axis

    def add_table(self, table: CombiningTable) -> None:
        for axis in table.axes:
            self.add_axis(axis)
        self.tables[table.id] = table

    def add_categorical(self, cat_id: str, cat: CategoricalTable) -> None:
        self.categorical[cat_id] = cat

    def add_interpolator(self, interp: Interpolator) -> None:
        self.interpolators[interp.id] = interp

    def add_rule_file(self, name: str, text: str) -> None:
        rules_dsl.parse_rules(text)  # reject unparseable text at the door
        self.rules[name] = text

    def add_proposition(self, prop: Proposition) -> None:
        self.propositions[prop.id] = prop

    def add_rule(self, spec: RuleSpec) -> None:
        for pid in (*spec.premises, spec.conclusion):
            if pid not in self.propositions:
                raise UnknownProposition(
                    f"rule {spec.id!r} references unknown proposition {pid!r}"
                )
        if spec.combiner_kind == "table":
            self._table(spec.table or "")
        elif spec.combiner_kind == "interpolated":
            self._categorical(spec.categorical or "")
            self._interpolator(spec.interpolator or "")
        else:
            raise OutOfRange(f"unknown combiner kind {spec.combiner_kind!r}")
        self.network_rules.append(spec)

    def set_corroboration(self, spec: CorroborationSpec) -> None:
        if spec.kind is CorroborationKind.TABLE:
            self._table(spec.table_id or "")
        self.corroboration[spec.conclusion] = spec

    # ------------------------------------------------------------------
    # resolution

    def _table(self, table_id: str) -> CombiningTable:
        if table_id not in self.tables:
            raise UnknownId(f"no table {table_id!r}")
        return self.tables[table_id]

    def _categorical(self, cat_id: str) -> CategoricalTable:
        if cat_id not in self.categorical:
            raise UnknownId(f"no categorical table {cat_id!r}")
        return self.categorical[cat_id]

    def _interpolator(self, interp_id: str) -> Interpolator:
        if interp_id not in self.interpolators:
            raise UnknownId(f"no interpolator {interp_id!r}")
        return self.interpolators[interp_id]

    def resolve_categorical_id(self, table_id: str,
                               explicit: str | None = None) -> str:
        """Explicit id, else the table's binding, else the document's only
        categorical table."""
        cat_id = explicit or self.bindings.get(table_id, (None, None))[0]
        if cat_id is None and len(self.categorical) == 1:
            cat_id = next(iter(self.categorical))
        if cat_id is None:
            raise UnknownId(f"table {table_id!r} has no categorical table bound")
        self._categorical(cat_id)
        return cat_id

    def resolve_interpolator_id(self, table_id: str,
                                explicit: str | None = None) -> str:
        cat_id = explicit or self.bindings.get(table_id, (None, None))[1]
        if cat_id is None and len(self.interpolators) == 1:
            cat_id = next(iter(self.interpolators))
        if cat_id is None:
            raise UnknownId(f"table {table_id!r} has no interpolator bound")
        self._interpolator(cat_id)
        return cat_id

    # ------------------------------------------------------------------
    # journal bookkeeping

    def head(self) -> str | None:
        return self.journal[-1].id if self.journal else None

    def _check_head(self, expected: str | None) -> None:
        if expected is None:
            return
        head = self.head()
        if (head or "") != expected:
            raise StaleJournalHead(
                f"journal head is {head!r}, caller expected {expected!r}"
            )

    def _next_id(self) -> str:
        highest = 0
        for entry in self.journal:
            if entry.id.startswith("e") and entry.id[1:].isdigit():
                highest = max(highest, int(entry.id[1:]))
        return f"e{highest + 1}"

    def _append(self, entry: JournalEntry) -> JournalEntry:
        self.journal.append(entry)
        return entry

    # ------------------------------------------------------------------
    # journaled mutations

    def set_cell(self, table_id: str, index: tuple[int, ...], value: float,
                 note: str | None = None, *, author: str = "expert",
                 expected_head: str | None = None, entry_id: str | None = None,
                 timestamp: str | None = None) -> JournalEntry:
        self._check_head(expected_head)
        table = self._table(table_id)
        index = tuple(index)
        before = table.cell(index)
        self.tables[table_id] = set_specified(table, index, value, note)
        after = self.tables[table_id].cell(index)
        changes = [] if before == after else [CellChange(index, before, after)]
        return self._append(make_entry(
            KIND_SET_CELL, table_id,
            {"index": list(index), "value": float(value), "note": note},
            changes, entry_id=entry_id or self._next_id(), author=author,
            timestamp=timestamp,
        ))

    def override_cell(self, table_id: str, index: tuple[int, ...], value: float,
                      note: str | None = None, *, author: str = "expert",
                      expected_head: str | None = None,
                      entry_id: str | None = None,
                      timestamp: str | None = None) -> JournalEntry:
        self._check_head(expected_head)
        table = self._table(table_id)
        table, entry = revision.override_cell(
            table, tuple(index), value, note,
            entry_id=entry_id or self._next_id(), author=author,
            timestamp=timestamp,
        )
        self.tables[table_id] = table
        return self._append(entry)

    def override_block(self, table_id: str, region: Region | Mapping[str, object],
                       value: float, note: str | None = None, *,
                       author: str = "expert", expected_head: str | None = None,
                       entry_id: str | None = None,
                       timestamp: str | None = None) -> JournalEntry:
        self._check_head(expected_head)
        table = self._table(table_id)
        if not isinstance(region, Region):
            region = make_region(table.axes, region)
        table, entry = revision.override_block(
            table, region, value, note,
            entry_id=entry_id or self._next_id(), author=author,
            timestamp=timestamp,
        )
        self.tables[table_id] = table
        return self._append(entry)

    def mark_meaningless(self, table_id: str,
                         region: Region | Mapping[str, object], *,
                         author: str = "expert",
                         expected_head: str | None = None,
                         entry_id: str | None = None,
                         timestamp: str | None = None) -> JournalEntry:
        self._check_head(expected_head)
        table = self._table(table_id)
        if not isinstance(region, Region):
            region = make_region(table.axes, region)
        after = _mark_meaningless_cells(table, region)
        changes = revision.diff(table, after)
        self.tables[table_id] = after
        return self._append(make_entry(
            KIND_MARK_MEANINGLESS, table_id,
            {"region": [None if s is None else list(s) for s in region.selections]},
            changes, entry_id=entry_id or self._next_id(), author=author,
            timestamp=timestamp,
        ))

    def derive(self, table_id: str, categorical_id: str | None = None,
               interpolator_id: str | None = None, *, author: str = "expert",
               expected_head: str | None = None, entry_id: str | None = None,
               timestamp: str | None = None) -> tuple[JournalEntry, int]:
        """Fill the table from a categorical table. Ids default to the
        table's last-used binding, then to the document's only candidate."""
        self._check_head(expected_head)
        table = self._table(table_id)
        cat_id = self.resolve_categorical_id(table_id, categorical_id)
        interp_id = self.resolve_interpolator_id(table_id, interpolator_id)
        cat = self._categorical(cat_id)
        interp = self._interpolator(interp_id)
        after = derive_full(table, cat, interp)
        changes = revision.diff(table, after)
        filled = sum(
            1 for c in changes if c.before.state is Provenance.UNSPECIFIED
        )
        self.tables[table_id] = after
        binding_before = list(self.bindings.get(table_id, (None, None)))
        self.bindings[table_id] = (cat_id, interp_id)
        entry = self._append(make_entry(
            KIND_DERIVE, table_id,
            {"categorical": cat_id, "interpolator": interp_id, "filled": filled,
             "binding_before": binding_before,
             "binding_after": [cat_id, interp_id]},
            changes, entry_id=entry_id or self._next_id(), author=author,
            timestamp=timestamp,
        ))
        return entry, filled

    def apply_rules(self, table_id: str, text: str,
                    file_name: str | None = None, *, author: str = "expert",
                    expected_head: str | None = None,
                    entry_id: str | None = None, timestamp: str | None = None,
                    ) -> tuple[JournalEntry, tuple[CellChange, ...]]:
        self._check_head(expected_head)
        table = self._table(table_id)
        ruleset = rules_dsl.parse_rules(text)
        compiled = rules_dsl.compile(
            ruleset, table.axes,
            conclusion=table.conclusion,
            conclusion_scale=table.conclusion_scale,
        )
        result = rules_dsl.apply(table, compiled)
        file_before = self.rules.get(file_name) if file_name else None
        if file_name:
            self.rules[file_name] = text
        self.tables[table_id] = result.table
        entry = self._append(make_entry(
            KIND_APPLY_RULES, table_id,
            {"file": file_name, "text": text, "file_before": file_before},
            result.changes, entry_id=entry_id or self._next_id(), author=author,
            timestamp=timestamp,
        ))
        return entry, result.changes

    def edit_corner(self, table_id: str, corner: tuple[int, ...], value: float,
                    interpolator_id: str | None = None,
                    note: str | None = None, *, author: str = "expert",
                    expected_head: str | None = None,
                    entry_id: str | None = None,
                    timestamp: str | None = None) -> JournalEntry:
        self._check_head(expected_head)
        table = self._table(table_id)
        interp = self._interpolator(
            self.resolve_interpolator_id(table_id, interpolator_id))
        table, entry = revision.edit_corner(
            table, tuple(corner), value, interp, note,
            entry_id=entry_id or self._next_id(), author=author,
            timestamp=timestamp,
        )
        self.tables[table_id] = table
        return self._append(entry)

    def swap_interpolator(self, table_id: str, interpolator_id: str, *,
                          author: str = "expert",
                          expected_head: str | None = None,
                          entry_id: str | None = None,
                          timestamp: str | None = None,
                          ) -> tuple[JournalEntry, int]:
        self._check_head(expected_head)
        table = self._table(table_id)
        interp = self._interpolator(interpolator_id)
        table, entry, warning = revision.swap_interpolator(
            table, interp, entry_id=entry_id or self._next_id(), author=author,
            timestamp=timestamp,
        )
        self.tables[table_id] = table
        binding_before = list(self.bindings.get(table_id, (None, None)))
        self.bindings[table_id] = (binding_before[0], interpolator_id)
        entry = dataclasses.replace(entry, payload={
            **entry.payload,
            "binding_before": binding_before,
            "binding_after": [binding_before[0], interpolator_id],
        })
        return self._append(entry), warning

    def clear_override(self, table_id: str, index: tuple[int, ...], *,
                       author: str = "expert",
                       expected_head: str | None = None,
                       entry_id: str | None = None,
                       timestamp: str | None = None) -> JournalEntry:
        self._check_head(expected_head)
        table = self._table(table_id)
        interp = self._interpolator(self.resolve_interpolator_id(table_id))
        table, entry = revision.clear_override(
            table, tuple(index), interp,
            entry_id=entry_id or self._next_id(), author=author,
            timestamp=timestamp,
        )
        self.tables[table_id] = table
        return self._append(entry)

    def revert(self, entry_id: str, *, author: str = "expert",
               expected_head: str | None = None,
               new_entry_id: str | None = None,
               timestamp: str | None = None) -> JournalEntry:
        """Undo a journal entry. Refused unless the entry is the latest
        toucher of every cell it changed; non-linear undo on expert
        knowledge invites silent loss."""
        self._check_head(expected_head)
        target = next((e for e in self.journal if e.id == entry_id), None)
        if target is None:
            raise UnknownId(f"no journal entry {entry_id!r}")
        conflicts = conflicting_later_entries(self.journal, entry_id)
        if conflicts:
            raise NotRevertible(
                f"entry {entry_id!r} is not the latest toucher of its cells; "
                f"later entries: {', '.join(conflicts)}", conflicts
            )
        payload: dict[str, object] = {"of": entry_id}
        changes: tuple[CellChange, ...] = ()
        if target.table_id is not None and target.changes:
            table = self._table(target.table_id)
            changes = invert_changes(target.changes)
            self.tables[target.table_id] = table.with_cells(
                {c.index: c.after for c in changes}
            )
        if "binding_after" in target.payload and target.table_id is not None:
            restored = target.payload["binding_before"]
            payload["binding_before"] = target.payload["binding_after"]
            payload["binding_after"] = restored
            self.bindings[target.table_id] = (restored[0], restored[1])
        if target.payload.get("file"):
            # the entry created or replaced a rule file; put the old text back
            name = target.payload["file"]
            restored_text = target.payload.get("file_before")
            payload["file"] = name
            payload["text"] = restored_text
            payload["file_before"] = self.rules.get(name)
            if restored_text is None:
                self.rules.pop(name, None)
            else:
                self.rules[name] = restored_text
        return self._append(make_entry(
            KIND_REVERT, target.table_id, payload, changes,
            entry_id=new_entry_id or self._next_id(), author=author,
            timestamp=timestamp,
        ))

    # ------------------------------------------------------------------
    # evaluation

    def _engine_rule(self, spec: RuleSpec) -> InferenceRule:
        if spec.combiner_kind == "table":
            combiner = TableCombiner(spec.table)
        else:
            combiner = InterpolatedCombiner(
                self._categorical(spec.categorical),
                self._interpolator(spec.interpolator),
            )
        return InferenceRule(spec.id, spec.premises, spec.conclusion,
                             combiner, spec.k)

    def evaluate(self, evidence: Mapping[str, float | BeliefValue],
                 policy: BlankPolicy = BlankPolicy.HALT,
                 ) -> tuple[dict[str, BeliefValue], dict[str, Trace]]:
        env = {}
        for pid, value in evidence.items():
            prop = self.propositions.get(pid)
            if prop is None:
                raise UnknownProposition(f"no proposition {pid!r}")
            env[pid] = (value if isinstance(value, BeliefValue)
                        else make_belief(value, prop.scale))
        engine_rules = [self._engine_rule(s) for s in self.network_rules]
        return evaluate_network(engine_rules, self.corroboration, env, policy,
                                tables=self.tables)

    # ------------------------------------------------------------------
    # history reconstruction

    def table_as_of(self, table_id: str, entry_id: str | None) -> CombiningTable:
        """The table's state just after the given entry was applied; None
        (or "initial") means before any journal entry."""
        table = self._table(table_id)
        if entry_id in (None, "initial"):
            boundary = -1
        else:
            boundary = next(
                (i for i, e in enumerate(self.journal) if e.id == entry_id), None
            )
            if boundary is None:
                raise UnknownId(f"no journal entry {entry_id!r}")
        cells = list(table.cells)
        for entry in reversed(self.journal[boundary + 1:]):
            if entry.table_id != table_id:
                continue
            for change in entry.changes:
                cells[table.offset(change.index)] = change.before
        return dataclasses.replace(table, cells=tuple(cells))

    def initial_document(self) -> "Document":
        """The document as it was before the first journal entry."""
        doc = Document(self.version)
        doc.axes = dict(self.axes)
        doc.categorical = dict(self.categorical)
        doc.interpolators = dict(self.interpolators)
        doc.propositions = dict(self.propositions)
        doc.network_rules = list(self.network_rules)
        doc.corroboration = dict(self.corroboration)
        doc.extras = {k: dict(v) for k, v in self.extras.items()}
        doc.rules = dict(self.rules)
        doc.bindings = dict(self.bindings)
        for table_id, table in self.tables.items():
            doc.tables[table_id] = self.table_as_of(table_id, None)
        for entry in reversed(self.journal):
            if "binding_after" in entry.payload and entry.table_id is not None:
                before = entry.payload["binding_before"]
                doc.bindings[entry.table_id] = (before[0], before[1])
            if entry.payload.get("file"):
                name = entry.payload["file"]
                previous = entry.payload.get("file_before")
                if previous is None:
                    doc.rules.pop(name, None)
                else:
                    doc.rules[name] = previous
        doc.bindings = {k: v for k, v in doc.bindings.items()
                        if v != (None, None)}
        return doc

    def replay(self) -> "Document":
        """Re-execute the journal against the initial document. The result
        must match this document exactly; every entry carries its recorded
        identity so even ids and timestamps reproduce."""
        doc = self.initial_document()
        for e in self.journal:
            identity = dict(entry_id=e.id, author=e.author, timestamp=e.timestamp)
            p = e.payload
            if e.kind == KIND_SET_CELL:
                doc.set_cell(e.table_id, tuple(p["index"]), p["value"],
                             p.get("note"), **identity)
            elif e.kind == KIND_OVERRIDE_CELL:
                doc.override_cell(e.table_id, tuple(p["index"]), p["value"],
                                  p.get("note"), **identity)
            elif e.kind == KIND_OVERRIDE_BLOCK:
                doc.override_block(e.table_id, _region_from_payload(p["region"]),
                                   p["value"], p.get("note"), **identity)
            elif e.kind == KIND_MARK_MEANINGLESS:
                doc.mark_meaningless(e.table_id,
                                     _region_from_payload(p["region"]), **identity)
            elif e.kind == KIND_DERIVE:
                doc.derive(e.table_id, p["categorical"], p["interpolator"],
                           **identity)
            elif e.kind == KIND_APPLY_RULES:
                doc.apply_rules(e.table_id, p["text"], p.get("file"), **identity)
            elif e.kind == KIND_EDIT_CORNER:
                doc.edit_corner(e.table_id, tuple(p["corner"]), p["value"],
                                p["interpolator"], p.get("note"), **identity)
            elif e.kind == KIND_SWAP_INTERPOLATOR:
                doc.swap_interpolator(e.table_id, p["interpolator"], **identity)
            elif e.kind == KIND_CLEAR_OVERRIDE:
                doc.clear_override(e.table_id, tuple(p["index"]), **identity)
            elif e.kind == KIND_REVERT:
                doc.revert(p["of"], new_entry_id=e.id, author=e.author,
                           timestamp=e.timestamp)
            else:
                raise SchemaError(f"journal.{e.id}", f"unknown kind {e.kind!r}")
        return doc


def _region_from_payload(raw: list) -> Region:
    return Region(tuple(
        None if sel is None else tuple(float(v) for v in sel) for sel in raw
    ))


# ----------------------------------------------------------------------
# JSON serialization

def _corner_key(corner: tuple[int, ...]) -> str:
    return "".join("1" if b else "0" for b in corner)


def _corner_from_key(key: str, arity: int, path: str) -> tuple[int, ...]:
    if len(key) != arity or any(ch not in "01" for ch in key):
        raise SchemaError(path, f"bad corner key {key!r} for arity {arity}")
    return tuple(1 if ch == "1" else 0 for ch in key)


def _scale_payload(scale: BeliefScale) -> dict:
    return {"kind": scale.kind.value, "min": scale.min, "max": scale.max,
            "ignorance": scale.ignorance}


def _cell_payload(cell: Cell) -> list:
    s = cell.state
    if s is Provenance.UNSPECIFIED:
        return ["U"]
    if s is Provenance.INTENDED_BLANK:
        return ["M"] if cell.note is None else ["M", cell.note]
    if s is Provenance.SPECIFIED:
        return ["S", cell.value, cell.note]
    if s is Provenance.DERIVED:
        return ["D", cell.value, cell.interpolator]
    return ["O", cell.value, cell.entry, cell.note]


def _cell_from_payload(raw: object, path: str) -> Cell:
    if not isinstance(raw, list) or not raw or raw[0] not in "UMSDO":
        raise SchemaError(path, f"malformed cell {raw!r}")
    code = raw[0]
    try:
        if code == "U":
            if len(raw) != 1:
                raise SchemaError(path, "U cell carries no fields")
            return Cell(Provenance.UNSPECIFIED)
        if code == "M":
            if len(raw) == 1:
                return Cell(Provenance.INTENDED_BLANK)
            if len(raw) == 2 and isinstance(raw[1], str):
                return Cell(Provenance.INTENDED_BLANK, note=raw[1])
            raise SchemaError(path, "M cell carries at most a note")
        if code == "S" and len(raw) == 3:
            return Cell(Provenance.SPECIFIED, float(raw[1]), note=raw[2])
        if code == "D" and len(raw) == 3:
            return Cell(Provenance.DERIVED, float(raw[1]), interpolator=raw[2])
        if code == "O" and len(raw) == 4:
            return Cell(Provenance.OVERRIDDEN, float(raw[1]), entry=raw[2],
                        note=raw[3])
    except (TypeError, ValueError) as err:
        raise SchemaError(path, f"malformed cell {raw!r}: {err}") from None
    except WorkbenchError as err:
        raise SchemaError(path, str(err)) from None
    raise SchemaError(path, f"malformed cell {raw!r}")


def _require(payload: object, path: str) -> dict:
    if not isinstance(payload, dict):
        raise SchemaError(path, "expected an object")
    return payload


def to_payload(doc: Document) -> dict:
    tables = {}
    for table_id, table in sorted(doc.tables.items()):
        cat_id, interp_id = doc.bindings.get(table_id, (None, None))
        tables[table_id] = {
            "axes": [axis.proposition for axis in table.axes],
            "conclusion": table.conclusion,
            "scale": table.conclusion_scale.kind.value,
            "categorical": cat_id,
            "interpolator": interp_id,
            "cells": [_cell_payload(c) for c in table.cells],
            **doc.extras.get(f"tables.{table_id}", {}),
        }
    categorical = {
        cat_id: {
            "arity": cat.arity,
            "corners": {_corner_key(c): cat.corners[c]
                        for c in corner_order(cat.arity)},
        }
        for cat_id, cat in sorted(doc.categorical.items())
    }
    interpolators = {
        interp.id: {
            "kind": interp.kind.value,
            "joint": None if interp.joint is None else {
                _corner_key(c): w for c, w in sorted(interp.joint.items(),
                                                     reverse=True)
            },
        }
        for interp in (doc.interpolators[k] for k in sorted(doc.interpolators))
    }
    network = {
        "propositions": {
            p.id: {"statement": p.statement, "scale": p.scale.kind.value}
            for p in (doc.propositions[k] for k in sorted(doc.propositions))
        },
        "rules": [
            {
                "id": s.id, "premises": list(s.premises),
                "conclusion": s.conclusion,
                "combiner": (
                    {"kind": "table", "table": s.table}
                    if s.combiner_kind == "table" else
                    {"kind": "interpolated", "categorical": s.categorical,
                     "interpolator": s.interpolator}
                ),
                "k": s.k,
            }
            for s in doc.network_rules
        ],
    }
    corroboration = {
        spec.conclusion: {"kind": spec.kind.value, "table": spec.table_id}
        for spec in (doc.corroboration[k] for k in sorted(doc.corroboration))
    }
    journal = [
        {
            "id": e.id, "timestamp": e.timestamp, "author": e.author,
            "kind": e.kind, "table": e.table_id, "payload": dict(e.payload),
            "changes": [
                [list(c.index), _cell_payload(c.before), _cell_payload(c.after)]
                for c in e.changes
            ],
            **doc.extras.get(f"journal.{e.id}", {}),
        }
        for e in doc.journal
    ]
    return {
        "version": doc.version,
        "scales": {name: _scale_payload(s) for name, s in _SCALES.items()},
        "axes": {
            axis.proposition: {"scale": axis.scale.kind.value,
                               "levels": list(axis.levels)}
            for axis in (doc.axes[k] for k in sorted(doc.axes))
        },
        "tables": tables,
        "categorical": categorical,
        "interpolators": interpolators,
        "rules": dict(sorted(doc.rules.items())),
        "network": network,
        "corroboration": corroboration,
        "journal": journal,
        **doc.extras.get("", {}),
    }


def from_payload(payload: object) -> Document:
    payload = _require(payload, "")
    version = payload.get("version")
    if not isinstance(version, str) or not version:
        raise SchemaError("version", "missing or malformed version")
    major = version.split(".", 1)[0]
    if not major.isdigit():
        raise SchemaError("version", f"bad version {version!r}")
    if int(major) != 1:
        raise VersionUnsupported(f"major version {major} is not supported")

    doc = Document(version)
    top_extras = {k: v for k, v in payload.items() if k not in _TOP_KEYS}
    if top_extras:
        doc.extras[""] = top_extras

    for name, raw in _require(payload.get("scales", {}), "scales").items():
        if name not in _SCALES:
            raise SchemaError(f"scales.{name}", "unknown scale")
        if _require(raw, f"scales.{name}") != _scale_payload(_SCALES[name]):
            raise SchemaError(f"scales.{name}", "scale definition altered")

    for prop, raw in _require(payload.get("axes", {}), "axes").items():
        raw = _require(raw, f"axes.{prop}")
        try:
            axis = Axis(prop, scale_by_name(raw.get("scale", "")),
                        tuple(float(v) for v in raw.get("levels", [])))
        except (WorkbenchError, TypeError, ValueError) as err:
            raise SchemaError(f"axes.{prop}", str(err)) from None
        doc.axes[prop] = axis

    for cat_id, raw in _require(payload.get("categorical", {}),
                                "categorical").items():
        path = f"categorical.{cat_id}"
        raw = _require(raw, path)
        arity = raw.get("arity")
        if not isinstance(arity, int):
            raise SchemaError(path, "arity must be an integer")
        corners = {}
        for key, value in _require(raw.get("corners", {}), path).items():
            corner = _corner_from_key(key, arity, f"{path}.corners")
            corners[corner] = None if value is None else float(value)
        try:
            doc.categorical[cat_id] = CategoricalTable(arity, corners)
        except WorkbenchError as err:
            raise SchemaError(path, str(err)) from None

    for interp_id, raw in _require(payload.get("interpolators", {}),
                                   "interpolators").items():
        path = f"interpolators.{interp_id}"
        raw = _require(raw, path)
        kind_name = raw.get("kind")
        try:
            kind = InterpolatorKind(kind_name)
        except ValueError:
            raise SchemaError(path, f"unknown kind {kind_name!r}") from None
        joint = None
        if raw.get("joint") is not None:
            joint_raw = _require(raw["joint"], f"{path}.joint")
            arity = len(next(iter(joint_raw), ""))
            joint = {
                _corner_from_key(k, arity, f"{path}.joint"): float(w)
                for k, w in joint_raw.items()
            }
        try:
            doc.interpolators[interp_id] = Interpolator(interp_id, kind, joint)
        except WorkbenchError as err:
            raise SchemaError(path, str(err)) from None

    for table_id, raw in _require(payload.get("tables", {}), "tables").items():
        path = f"tables.{table_id}"
        raw = _require(raw, path)
        known = {"axes", "conclusion", "scale", "categorical", "interpolator",
                 "cells"}
        extras = {k: v for k, v in raw.items() if k not in known}
        if extras:
            doc.extras[path] = extras
        axes = []
        for prop in raw.get("axes", []):
            if prop not in doc.axes:
                raise SchemaError(f"{path}.axes", f"unknown axis {prop!r}")
            axes.append(doc.axes[prop])
        cells_raw = raw.get("cells")
        if not isinstance(cells_raw, list):
            raise SchemaError(f"{path}.cells", "expected a cell array")
        cells = tuple(
            _cell_from_payload(c, f"{path}.cells[{i}]")
            for i, c in enumerate(cells_raw)
        )
        try:
            table = CombiningTable(
                table_id, tuple(axes), raw.get("conclusion", ""),
                scale_by_name(raw.get("scale", "")), cells,
            )
        except WorkbenchError as err:
            raise SchemaError(path, str(err)) from None
        doc.tables[table_id] = table
        cat_id, interp_id = raw.get("categorical"), raw.get("interpolator")
        if cat_id is not None and cat_id not in doc.categorical:
            raise SchemaError(path, f"unknown categorical table {cat_id!r}")
        if interp_id is not None and interp_id not in doc.interpolators:
            raise SchemaError(path, f"unknown interpolator {interp_id!r}")
        if cat_id is not None or interp_id is not None:
            doc.bindings[table_id] = (cat_id, interp_id)

    for name, text in _require(payload.get("rules", {}), "rules").items():
        if not isinstance(text, str):
            raise SchemaError(f"rules.{name}", "rule file must be text")
        try:
            rules_dsl.parse_rules(text)
        except WorkbenchError as err:
            raise SchemaError(f"rules.{name}", f"does not parse: {err}") from None
        doc.rules[name] = text

    network = _require(payload.get("network", {}), "network")
    for pid, raw in _require(network.get("propositions", {}),
                             "network.propositions").items():
        raw = _require(raw, f"network.propositions.{pid}")
        try:
            scale = scale_by_name(raw.get("scale", ""))
        except WorkbenchError as err:
            raise SchemaError(f"network.propositions.{pid}", str(err)) from None
        doc.propositions[pid] = Proposition(pid, raw.get("statement", ""), scale)
    for i, raw in enumerate(network.get("rules", [])):
        path = f"network.rules[{i}]"
        raw = _require(raw, path)
        combiner = _require(raw.get("combiner", {}), f"{path}.combiner")
        kind = combiner.get("kind")
        if kind not in ("table", "interpolated"):
            raise SchemaError(f"{path}.combiner", f"unknown kind {kind!r}")
        spec = RuleSpec(
            raw.get("id", f"rule{i}"),
            tuple(raw.get("premises", [])),
            raw.get("conclusion", ""),
            kind,
            table=combiner.get("table"),
            categorical=combiner.get("categorical"),
            interpolator=combiner.get("interpolator"),
            k=None if raw.get("k") is None else float(raw["k"]),
        )
        try:
            doc.add_rule(spec)
        except WorkbenchError as err:
            raise SchemaError(path, str(err)) from None

    for pid, raw in _require(payload.get("corroboration", {}),
                             "corroboration").items():
        path = f"corroboration.{pid}"
        raw = _require(raw, path)
        try:
            kind = CorroborationKind(raw.get("kind"))
        except ValueError:
            raise SchemaError(path, f"unknown kind {raw.get('kind')!r}") from None
        spec = CorroborationSpec(pid, kind, raw.get("table"))
        try:
            doc.set_corroboration(spec)
        except WorkbenchError as err:
            raise SchemaError(path, str(err)) from None

    journal_raw = payload.get("journal", [])
    if not isinstance(journal_raw, list):
        raise SchemaError("journal", "expected an entry array")
    for i, raw in enumerate(journal_raw):
        path = f"journal[{i}]"
        raw = _require(raw, path)
        known = {"id", "timestamp", "author", "kind", "table", "payload",
                 "changes"}
        entry_id = raw.get("id")
        if not isinstance(entry_id, str) or not entry_id:
            raise SchemaError(path, "entry needs an id")
        extras = {k: v for k, v in raw.items() if k not in known}
        if extras:
            doc.extras[f"journal.{entry_id}"] = extras
        table_id = raw.get("table")
        if table_id is not None and table_id not in doc.tables:
            raise SchemaError(path, f"unknown table {table_id!r}")
        timestamp = raw.get("timestamp")
        if not isinstance(timestamp, str) or not timestamp:
            raise SchemaError(path, "entry needs a timestamp")
        changes = []
        for j, c in enumerate(raw.get("changes", [])):
            cpath = f"{path}.changes[{j}]"
            if not isinstance(c, list) or len(c) != 3:
                raise SchemaError(cpath, "change must be [index, before, after]")
            index = tuple(int(v) for v in c[0])
            changes.append(CellChange(
                index,
                _cell_from_payload(c[1], cpath),
                _cell_from_payload(c[2], cpath),
            ))
        try:
            entry = make_entry(
                raw.get("kind", ""), table_id,
                _require(raw.get("payload", {}), f"{path}.payload"), changes,
                entry_id=entry_id, author=raw.get("author", "expert"),
                timestamp=timestamp,
            )
        except WorkbenchError as err:
            raise SchemaError(path, str(err)) from None
        doc.journal.append(entry)

    return doc


def to_json(doc: Document) -> str:
    return json.dumps(to_payload(doc), indent=2, sort_keys=True) + "\n"


def from_json(text: str | bytes) -> Document:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as err:
        raise SchemaError("", f"not valid JSON: {err}") from None
    return from_payload(payload)


def save(doc: Document, destination: str | os.PathLike | IO[str]) -> int:
    """Write the document; returns bytes written."""
    text = to_json(doc)
    data = text.encode("utf-8")
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8") as fh:
            fh.write(text)
    return len(data)


def load(source: str | os.PathLike | IO[str]) -> Document:
    if hasattr(source, "read"):
        return from_json(source.read())
    try:
        with open(source, encoding="utf-8") as fh:
            return from_json(fh.read())
    except OSError as err:
        raise SchemaError(str(source), f"cannot read document: {err}") from None


# ----------------------------------------------------------------------
# CSV export

def _level_header(level: float) -> str:
    return f"{level:g}"


def _csv_2d(table: CombiningTable, render) -> list[str]:
    cols, rows = table.axes[0], table.axes[1]
    lines = ["," + ",".join(_level_header(lv) for lv in cols.levels)]
    for r in range(len(rows)):
        fields = [_level_header(rows.levels[r])]
        fields += [render(table.cell((c, r))) for c in range(len(cols))]
        lines.append(",".join(fields))
    return lines


def _csv_lines(table: CombiningTable, render) -> list[str]:
    if len(table.axes) == 1:
        axis = table.axes[0]
        return [
            ",".join(_level_header(lv) for lv in axis.levels),
            ",".join(render(table.cell((i,))) for i in range(len(axis))),
        ]
    if len(table.axes) == 2:
        return _csv_2d(table, render)
    # higher arities: one 2-D block per combination of the pinned axes
    lines = []
    pinned = table.axes[2:]
    for combo in itertools.product(*(range(len(a)) for a in pinned)):
        if lines:
            lines.append("")
        lines.append(",".join(
            f"{a.proposition}={_level_header(a.levels[i])}"
            for a, i in zip(pinned, combo)
        ))
        sliced = [
            table.cell((c, r) + combo)
            for c in range(len(table.axes[0]))
            for r in range(len(table.axes[1]))
        ]
        block = dataclasses.replace(
            table, axes=table.axes[:2], cells=tuple(sliced)
        )
        lines += _csv_2d(block, render)
    return lines


def export_csv(table: CombiningTable) -> str:
    """Printed-table presentation: axis levels as headers (descending),
    values rounded half-up to 2 decimals, blanks as empty fields."""
    def render(cell: Cell) -> str:
        return "" if cell.value is None else display_value(cell.value)
    return "\n".join(_csv_lines(table, render)) + "\n"


def export_provenance_csv(table: CombiningTable) -> str:
    """Same layout as export_csv, one-letter provenance codes per cell."""
    return "\n".join(_csv_lines(table, lambda c: c.state.value)) + "\n"
