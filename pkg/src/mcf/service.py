"""HTTP/JSON service over a document store.

Every mutating endpoint appends a journal entry and answers with that
entry plus the new journal head; clients resubmit the head they saw
(``expected_head``) to detect concurrent edits. All belief arithmetic
happens here, server-side; clients only render what they are given.
"""

from __future__ import annotations

import socket
import threading
from pathlib import Path
from typing import Any, Callable, Literal, Mapping, TypeVar

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import document as documents
from . import revision
from .beliefs import BeliefValue, display_value
from .document import Document
from .engine import (
    BlankPolicy,
    CorroborationTrace,
    EvidenceTrace,
    InterpolationRecord,
    LookupRecord,
    RuleTrace,
    Trace,
)
from .errors import BindFailure, OutOfRange, ParseError, WorkbenchError
from .revision import JournalEntry
from .rules import format_rules, parse_rules
from .tables import Cell, CombiningTable, corner_order, corner_view

T = TypeVar("T")


class DocumentStore:
    """One document behind a lock. Mutations are serialized and, when the
    store is file-backed, written through after every successful change."""

    def __init__(self, doc: Document, path: str | Path | None = None):
        self.doc = doc
        self.path = Path(path) if path is not None else None
        self._lock = threading.RLock()

    @classmethod
    def open(cls, path: str | Path) -> "DocumentStore":
        return cls(documents.load(path), path)

    def read(self, fn: Callable[[Document], T]) -> T:
        with self._lock:
            return fn(self.doc)

    def mutate(self, fn: Callable[[Document], T]) -> T:
        with self._lock:
            result = fn(self.doc)
            if self.path is not None:
                documents.save(self.doc, self.path)
            return result


# ---------------------------------------------------------------------------
# request bodies


class CellWrite(BaseModel):
    index: list[int]
    value: float
    note: str | None = None
    author: str = "expert"
    expected_head: str | None = None


class RegionWrite(BaseModel):
    region: dict[str, Any]
    value: float
    note: str | None = None
    author: str = "expert"
    expected_head: str | None = None


class CornerEdit(BaseModel):
    corner: list[int]
    value: float
    interpolator: str | None = None
    note: str | None = None
    author: str = "expert"
    expected_head: str | None = None
    dry_run: bool = False


class DeriveRequest(BaseModel):
    categorical: str | None = None
    interpolator: str | None = None
    author: str = "expert"
    expected_head: str | None = None


class SwapRequest(BaseModel):
    interpolator: str
    author: str = "expert"
    expected_head: str | None = None


class RulesParseRequest(BaseModel):
    text: str


class EvaluateRequest(BaseModel):
    evidence: dict[str, float]
    policy: Literal["halt", "treat_as_ignorance"] = "halt"


class RevertRequest(BaseModel):
    author: str = "expert"
    expected_head: str | None = None


_POLICIES = {
    "halt": BlankPolicy.HALT,
    "treat_as_ignorance": BlankPolicy.TREAT_AS_IGNORANCE,
}


# ---------------------------------------------------------------------------
# payload builders


def _belief_payload(belief: BeliefValue) -> dict[str, Any]:
    return {
        "value": belief.value,
        "display": display_value(belief.value),
        "scale": belief.scale.kind.value,
    }


def _cell_payload(index: tuple[int, ...], cell: Cell) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "index": list(index),
        "code": cell.state.value,
        "value": cell.value,
        "display": "" if cell.value is None else display_value(cell.value),
    }
    if cell.note is not None:
        payload["note"] = cell.note
    if cell.interpolator is not None:
        payload["interpolator"] = cell.interpolator
    if cell.entry is not None:
        payload["entry"] = cell.entry
    return payload


def _changes_payload(changes) -> list[dict[str, Any]]:
    return [
        {
            "index": list(c.index),
            "before": _cell_payload(c.index, c.before),
            "after": _cell_payload(c.index, c.after),
        }
        for c in changes
    ]


def _entry_payload(entry: JournalEntry) -> dict[str, Any]:
    return {
        "id": entry.id,
        "timestamp": entry.timestamp,
        "author": entry.author,
        "kind": entry.kind,
        "table": entry.table_id,
        "payload": entry.payload,
        "changes": _changes_payload(entry.changes),
    }


def _table_summary(table: CombiningTable) -> dict[str, Any]:
    return {
        "id": table.id,
        "axes": [a.proposition for a in table.axes],
        "shape": list(table.shape),
        "conclusion": table.conclusion,
        "scale": table.conclusion_scale.kind.value,
    }


def _axis_payload(axis) -> dict[str, Any]:
    return {
        "proposition": axis.proposition,
        "scale": axis.scale.kind.value,
        "levels": list(axis.levels),
        "labels": [f"{level:g}" for level in axis.levels],
    }


def _corner_payloads(table: CombiningTable) -> list[dict[str, Any]]:
    cat = corner_view(table)
    out = []
    for corner in corner_order(cat.arity):
        value = cat.corners[corner]
        out.append({
            "corner": list(corner),
            "value": value,
            "display": None if value is None else display_value(value),
        })
    return out


def _record_payload(record: LookupRecord | InterpolationRecord) -> dict[str, Any]:
    if isinstance(record, LookupRecord):
        result = record.result
        return {
            "kind": "lookup",
            "table": record.table_id,
            "mode": result.mode.value,
            "blank": result.blank,
            "value": result.value,
            "provenance": result.provenance.value if result.provenance else None,
            "contributors": [
                {
                    "index": list(c.index),
                    "weight": c.weight,
                    "code": c.cell.state.value,
                    "value": c.cell.value,
                }
                for c in result.contributors
            ],
        }
    key = "".join
    return {
        "kind": "interpolation",
        "corners": {key(map(str, c)): v for c, v in record.corners.items()},
        "weights": {key(map(str, c)): w for c, w in record.weights.items()},
        "value": record.value,
    }


def _trace_payload(trace: Trace) -> dict[str, Any]:
    if isinstance(trace, EvidenceTrace):
        return {
            "kind": "evidence",
            "proposition": trace.proposition,
            "belief": _belief_payload(trace.belief),
        }
    if isinstance(trace, RuleTrace):
        return {
            "kind": "rule",
            "rule": trace.rule_id,
            "proposition": trace.proposition,
            "belief": _belief_payload(trace.belief),
            "record": _record_payload(trace.record),
            "premises": [_trace_payload(p) for p in trace.premises],
        }
    assert isinstance(trace, CorroborationTrace)
    return {
        "kind": "corroboration",
        "proposition": trace.proposition,
        "combiner": trace.kind.value,
        "belief": _belief_payload(trace.belief),
        "record": _record_payload(trace.record) if trace.record else None,
        "children": [_trace_payload(c) for c in trace.children],
    }


def _region_spec(raw: Mapping[str, Any]) -> dict[str, object]:
    """JSON region predicates to the tables-module spec format: null is
    any, a number is an exact level, a list is member-of, and
    {"op": "<="|">="|"=", "level": x} is a comparison."""
    spec: dict[str, object] = {}
    for prop, pred in raw.items():
        if isinstance(pred, Mapping):
            if set(pred) != {"op", "level"}:
                raise OutOfRange(
                    f"region predicate for {prop!r} needs exactly "
                    "{'op', 'level'}"
                )
            spec[prop] = (str(pred["op"]), pred["level"])
        elif isinstance(pred, (list, tuple)):
            spec[prop] = tuple(pred)
        else:
            spec[prop] = pred
    return spec


def _mutation_response(doc: Document, entry: JournalEntry,
                       **extra: Any) -> dict[str, Any]:
    return {
        "entry": _entry_payload(entry),
        "head": doc.head(),
        "changes": _changes_payload(entry.changes),
        **extra,
    }


# ---------------------------------------------------------------------------
# application


def create_app(store: DocumentStore) -> FastAPI:
    app = FastAPI(title="mcf workbench", docs_url=None, redoc_url=None)

    @app.exception_handler(WorkbenchError)
    async def workbench_error(request: Request, err: WorkbenchError):
        body: dict[str, Any] = {
            "code": err.code, "message": err.message, "path": err.path,
        }
        if isinstance(err, ParseError):
            body.update(line=err.line, column=err.column, expected=err.expected)
        return JSONResponse(status_code=err.http_status, content=body)

    @app.exception_handler(RequestValidationError)
    async def invalid_request(request: Request, err: RequestValidationError):
        first = err.errors()[0] if err.errors() else {}
        where = ".".join(str(p) for p in first.get("loc", ()))
        return JSONResponse(status_code=400, content={
            "code": "invalid_request",
            "message": f"{where}: {first.get('msg', 'invalid request body')}",
            "path": where or None,
        })

    @app.get("/api/tables")
    def list_tables() -> list[dict[str, Any]]:
        return store.read(lambda doc: [
            _table_summary(doc.tables[table_id])
            for table_id in sorted(doc.tables)
        ])

    @app.get("/api/tables/{table_id}")
    def table_detail(table_id: str) -> dict[str, Any]:
        def run(doc: Document) -> dict[str, Any]:
            table = doc._table(table_id)
            counts: dict[str, int] = {}
            for cell in table.cells:
                counts[cell.state.value] = counts.get(cell.state.value, 0) + 1
            cat_id, interp_id = doc.bindings.get(table_id, (None, None))
            return {
                **_table_summary(table),
                "categorical": cat_id,
                "interpolator": interp_id,
                "corners": _corner_payloads(table),
                "counts": counts,
                "head": doc.head(),
            }
        return store.read(run)

    @app.get("/api/tables/{table_id}/cells")
    def table_cells(table_id: str) -> dict[str, Any]:
        def run(doc: Document) -> dict[str, Any]:
            table = doc._table(table_id)
            return {
                "id": table.id,
                "axes": [_axis_payload(a) for a in table.axes],
                "conclusion": table.conclusion,
                "scale": table.conclusion_scale.kind.value,
                "cells": [
                    _cell_payload(index, table.cell(index))
                    for index in table.indices()
                ],
                "head": doc.head(),
            }
        return store.read(run)

    @app.post("/api/tables/{table_id}/cells")
    def override_cell(table_id: str, body: CellWrite) -> dict[str, Any]:
        def run(doc: Document) -> dict[str, Any]:
            entry = doc.override_cell(
                table_id, tuple(body.index), body.value, body.note,
                author=body.author, expected_head=body.expected_head,
            )
            return _mutation_response(doc, entry)
        return store.mutate(run)

    @app.post("/api/tables/{table_id}/region")
    def override_region(table_id: str, body: RegionWrite) -> dict[str, Any]:
        def run(doc: Document) -> dict[str, Any]:
            entry = doc.override_block(
                table_id, _region_spec(body.region), body.value, body.note,
                author=body.author, expected_head=body.expected_head,
            )
            return _mutation_response(doc, entry)
        return store.mutate(run)

    @app.post("/api/tables/{table_id}/corners")
    def edit_corner(table_id: str, body: CornerEdit) -> dict[str, Any]:
        if body.dry_run:
            def preview(doc: Document) -> dict[str, Any]:
                table = doc._table(table_id)
                interp = doc.interpolators[
                    doc.resolve_interpolator_id(table_id, body.interpolator)
                ]
                _, entry = revision.edit_corner(
                    table, tuple(body.corner), body.value, interp, body.note,
                    entry_id="preview", author=body.author,
                )
                return {
                    "committed": False,
                    "head": doc.head(),
                    "changes": _changes_payload(entry.changes),
                }
            return store.read(preview)

        def run(doc: Document) -> dict[str, Any]:
            entry = doc.edit_corner(
                table_id, tuple(body.corner), body.value, body.interpolator,
                body.note, author=body.author,
                expected_head=body.expected_head,
            )
            return _mutation_response(doc, entry, committed=True)
        return store.mutate(run)

    @app.post("/api/tables/{table_id}/derive")
    def derive(table_id: str, body: DeriveRequest) -> dict[str, Any]:
        def run(doc: Document) -> dict[str, Any]:
            entry, filled = doc.derive(
                table_id, body.categorical, body.interpolator,
                author=body.author, expected_head=body.expected_head,
            )
            return _mutation_response(doc, entry, filled=filled)
        return store.mutate(run)

    @app.post("/api/tables/{table_id}/interpolator")
    def swap_interpolator(table_id: str, body: SwapRequest) -> dict[str, Any]:
        def run(doc: Document) -> dict[str, Any]:
            entry, changed = doc.swap_interpolator(
                table_id, body.interpolator,
                author=body.author, expected_head=body.expected_head,
            )
            return _mutation_response(doc, entry, changed=changed)
        return store.mutate(run)

    @app.get("/api/tables/{table_id}/diff")
    def table_diff(table_id: str, against: str) -> dict[str, Any]:
        def run(doc: Document) -> dict[str, Any]:
            old = doc.table_as_of(table_id, against)
            changes = revision.diff(old, doc._table(table_id))
            return {
                "table": table_id,
                "against": against,
                "count": len(changes),
                "changes": _changes_payload(changes),
                "head": doc.head(),
            }
        return store.read(run)

    @app.post("/api/rules/parse")
    def rules_parse(body: RulesParseRequest) -> dict[str, Any]:
        ruleset = parse_rules(body.text)
        return {
            "ok": True,
            "rules": len(ruleset.rules),
            "formatted": format_rules(ruleset),
        }

    @app.post("/api/evaluate")
    def evaluate(body: EvaluateRequest) -> dict[str, Any]:
        def run(doc: Document) -> dict[str, Any]:
            env, traces = doc.evaluate(body.evidence, _POLICIES[body.policy])
            conclusions = {
                pid: _belief_payload(belief)
                for pid, belief in sorted(env.items())
                if pid not in body.evidence
            }
            return {
                "evidence": {
                    pid: _belief_payload(env[pid]) for pid in sorted(body.evidence)
                },
                "conclusions": conclusions,
                "traces": {
                    pid: _trace_payload(traces[pid]) for pid in sorted(conclusions)
                },
            }
        return store.read(run)

    @app.get("/api/journal")
    def journal() -> dict[str, Any]:
        def run(doc: Document) -> dict[str, Any]:
            return {
                "head": doc.head(),
                "entries": [
                    _entry_payload(e) for e in reversed(doc.journal)
                ],
            }
        return store.read(run)

    @app.post("/api/journal/{entry_id}/revert")
    def revert(entry_id: str, body: RevertRequest | None = None) -> dict[str, Any]:
        body = body or RevertRequest()

        def run(doc: Document) -> dict[str, Any]:
            entry = doc.revert(
                entry_id, author=body.author, expected_head=body.expected_head,
            )
            return _mutation_response(doc, entry)
        return store.mutate(run)

    return app


def parse_bind(bind: str) -> tuple[str, int]:
    host, sep, port_text = bind.rpartition(":")
    if not sep or not host:
        raise BindFailure(f"bind address {bind!r} is not host:port")
    try:
        port = int(port_text)
    except ValueError:
        raise BindFailure(f"bind address {bind!r} has a non-numeric port")
    if not 0 <= port <= 65535:
        raise BindFailure(f"port {port} out of range")
    return host, port


def serve(store: DocumentStore, bind: str = "127.0.0.1:8765") -> None:
    """Run the service until interrupted."""
    host, port = parse_bind(bind)
    # surface address problems as our own error before uvicorn takes over
    try:
        probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
        probe.close()
    except OSError as err:
        raise BindFailure(f"cannot bind {bind}: {err}") from err

    import uvicorn

    uvicorn.run(create_app(store), host=host, port=port, log_level="info")
