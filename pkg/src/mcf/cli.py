"""Command-line front end.

Works directly on a local ``.mcf.json`` document; ``mcf serve`` exposes
the same document over HTTP for the editor UI. Exit codes: 0 success,
2 validation error, 3 conflict (or a blank cell halting evaluation).
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import document as documents
from . import fixtures, revision
from .beliefs import display_value
from .document import Document
from .engine import (
    BlankPolicy,
    CorroborationTrace,
    EvidenceTrace,
    InterpolationRecord,
    LookupRecord,
    RuleTrace,
    Trace,
    explain as explain_trace,
)
from .errors import OutOfRange, WorkbenchError
from .service import DocumentStore
from .tables import LookupMode, lookup as table_lookup

_MODES = {
    "exact": LookupMode.EXACT,
    "snap": LookupMode.SNAP,
    "continuous": LookupMode.CONTINUOUS,
}

_POLICIES = {
    "halt": BlankPolicy.HALT,
    "treat_as_ignorance": BlankPolicy.TREAT_AS_IGNORANCE,
}


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise OutOfRange(f"{what} must be comma-separated numbers, got {text!r}")


def _ints(text: str, what: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip() != "")
    except ValueError:
        raise OutOfRange(f"{what} must be comma-separated integers, got {text!r}")


def _evidence_pairs(text: str) -> dict[str, float]:
    env: dict[str, float] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        pid, sep, raw = part.partition("=")
        if not sep or not pid:
            raise OutOfRange(f"evidence must be id=value pairs, got {part!r}")
        try:
            env[pid.strip()] = float(raw)
        except ValueError:
            raise OutOfRange(f"evidence value for {pid!r} is not a number")
    if not env:
        raise OutOfRange("no evidence given")
    return env


def _region_spec(text: str) -> dict[str, object]:
    """Parse ``prop>=level; prop=l1|l2; prop<=level`` into a region spec.
    ``=`` with several ``|``-separated levels means member-of."""
    spec: dict[str, object] = {}
    for clause in text.split(";"):
        clause = clause.strip()
        if not clause:
            continue
        for op in (">=", "<=", "="):
            pid, sep, raw = clause.partition(op)
            if sep:
                break
        if not sep or not pid.strip():
            raise OutOfRange(
                f"region clause {clause!r} is not prop>=level, "
                "prop<=level, or prop=l1|l2"
            )
        pid = pid.strip()
        if op == "=":
            levels = _floats(raw.replace("|", ","), f"levels for {pid}")
            spec[pid] = levels[0] if len(levels) == 1 else tuple(levels)
        else:
            value = _floats(raw, f"level for {pid}")
            if len(value) != 1:
                raise OutOfRange(f"{op} takes one level, got {raw!r}")
            spec[pid] = (op, value[0])
    if not spec:
        raise OutOfRange("empty region")
    return spec


def _load(doc_path: str) -> Document:
    return documents.load(doc_path)


def _save(doc: Document, doc_path: str) -> None:
    documents.save(doc, doc_path)


def _echo_changes(changes, limit: int = 8) -> None:
    for change in changes[:limit]:
        before = "blank" if change.before.value is None \
            else display_value(change.before.value)
        after = "blank" if change.after.value is None \
            else display_value(change.after.value)
        click.echo(
            f"  {list(change.index)}: {before} [{change.before.state.value}]"
            f" -> {after} [{change.after.state.value}]"
        )
    if len(changes) > limit:
        click.echo(f"  ... and {len(changes) - limit} more")


@click.group()
@click.option("--doc", "doc_path", default="knowledge.mcf.json",
              envvar="MCF_DOC", show_default=True,
              help="Path of the document to operate on.")
@click.pass_context
def cli(ctx: click.Context, doc_path: str) -> None:
    """Workbench for modifiable combining functions."""
    ctx.obj = doc_path


@cli.command()
@click.option("--fixture", type=click.Choice(["empty", *sorted(fixtures.FIXTURES)]),
              default="empty", show_default=True,
              help="Seed the new document with a built-in example.")
@click.option("--force", is_flag=True, help="Overwrite an existing file.")
@click.pass_obj
def init(doc_path: str, fixture: str, force: bool) -> None:
    """Create a new document."""
    path = Path(doc_path)
    if path.exists() and not force:
        raise OutOfRange(f"{doc_path} already exists (use --force to replace)")
    doc = Document() if fixture == "empty" else fixtures.FIXTURES[fixture]()
    _save(doc, doc_path)
    click.echo(f"wrote {doc_path} ({fixture})")


@cli.command()
@click.argument("table")
@click.option("--interp", "interpolator", default=None,
              help="Interpolator id (defaults to the table's binding).")
@click.option("--categorical", default=None,
              help="Categorical table id (defaults to the table's binding).")
@click.pass_obj
def derive(doc_path: str, table: str, interpolator: str | None,
           categorical: str | None) -> None:
    """Fill a table's unspecified cells by interpolation."""
    doc = _load(doc_path)
    entry, filled = doc.derive(table, categorical, interpolator)
    _save(doc, doc_path)
    click.echo(f"{entry.id}: filled {filled} cells in {table}")


@cli.command()
@click.argument("table")
@click.option("--point", required=True,
              help="Comma-separated belief values, one per axis.")
@click.option("--mode", type=click.Choice(sorted(_MODES)), default="exact",
              show_default=True)
@click.pass_obj
def lookup(doc_path: str, table: str, point: str, mode: str) -> None:
    """Look up one combination of evidence."""
    doc = _load(doc_path)
    result = table_lookup(doc._table(table), _floats(point, "--point"),
                          _MODES[mode])
    if result.blank:
        reason = result.blank_reason.value if result.blank_reason else "?"
        click.echo(f"blank ({reason})")
    else:
        provenance = result.provenance.value if result.provenance else "blend"
        click.echo(f"{display_value(result.value)} [{provenance}]"
                   f" = {result.value!r}")


@cli.command("set")
@click.argument("table")
@click.option("--index", required=True, help="Comma-separated cell index.")
@click.option("--value", type=float, required=True)
@click.option("--note", default=None)
@click.pass_obj
def set_cell(doc_path: str, table: str, index: str, value: float,
             note: str | None) -> None:
    """Specify one cell's value."""
    doc = _load(doc_path)
    entry = doc.set_cell(table, _ints(index, "--index"), value, note)
    _save(doc, doc_path)
    click.echo(f"{entry.id}: set {table}{list(entry.changes[0].index)}"
               f" = {display_value(value)}")


@cli.command()
@click.argument("table")
@click.option("--index", default=None, help="Comma-separated cell index.")
@click.option("--region", "region_text", default=None,
              help='Region, e.g. "episode>=.5; risk=1|.875".')
@click.option("--value", type=float, required=True)
@click.option("--note", default=None)
@click.pass_obj
def override(doc_path: str, table: str, index: str | None,
             region_text: str | None, value: float, note: str | None) -> None:
    """Override a cell or a block of cells with expert judgment."""
    if (index is None) == (region_text is None):
        raise OutOfRange("give exactly one of --index or --region")
    doc = _load(doc_path)
    if index is not None:
        entry = doc.override_cell(table, _ints(index, "--index"), value, note)
    else:
        entry = doc.override_block(table, _region_spec(region_text), value, note)
    _save(doc, doc_path)
    click.echo(f"{entry.id}: overrode {len(entry.changes)} cells in {table}")
    _echo_changes(entry.changes)


@cli.group()
def rules() -> None:
    """Rule-file operations."""


@rules.command("apply")
@click.argument("table")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def rules_apply(doc_path: str, table: str, file: str) -> None:
    """Compile a rule file and write its conclusions into a table."""
    doc = _load(doc_path)
    text = Path(file).read_text(encoding="utf-8")
    entry, changes = doc.apply_rules(table, text, Path(file).name)
    _save(doc, doc_path)
    click.echo(f"{entry.id}: applied {Path(file).name},"
               f" {len(changes)} cells changed")
    _echo_changes(changes)


@cli.command()
@click.argument("doc_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("doc_b", type=click.Path(exists=True, dir_okay=False))
@click.option("--table", "table_id", required=True)
def diff(doc_a: str, doc_b: str, table_id: str) -> None:
    """Cell-level differences of one table between two documents."""
    a = documents.load(doc_a)
    b = documents.load(doc_b)
    changes = revision.diff(a._table(table_id), b._table(table_id))
    click.echo(f"{len(changes)} cells differ")
    _echo_changes(changes, limit=100)


@cli.command()
@click.option("--evidence", required=True, help="id=value,id=value,...")
@click.option("--policy", type=click.Choice(sorted(_POLICIES)),
              default="halt", show_default=True)
@click.pass_obj
def evaluate(doc_path: str, evidence: str, policy: str) -> None:
    """Propagate base evidence through the rule network."""
    doc = _load(doc_path)
    base = _evidence_pairs(evidence)
    env, _ = doc.evaluate(base, _POLICIES[policy])
    for pid in sorted(env):
        if pid in base:
            continue
        belief = env[pid]
        click.echo(f"{pid} = {display_value(belief.value)} ({belief.value!r})")


def _render_trace(trace: Trace, depth: int = 0) -> None:
    pad = "  " * depth
    if isinstance(trace, EvidenceTrace):
        click.echo(f"{pad}evidence {trace.proposition}"
                   f" = {display_value(trace.belief.value)}")
        return
    if isinstance(trace, RuleTrace):
        record = trace.record
        if isinstance(record, LookupRecord):
            how = f"table {record.table_id} ({record.result.mode.value})"
        else:
            assert isinstance(record, InterpolationRecord)
            corners = ", ".join(
                f"{''.join(map(str, c))}:{v}"
                for c, v in sorted(record.corners.items(), reverse=True)
            )
            how = f"interpolation over corners {corners}"
        click.echo(f"{pad}{trace.proposition}"
                   f" = {display_value(trace.belief.value)}"
                   f" by rule {trace.rule_id} via {how}")
        for premise in trace.premises:
            _render_trace(premise, depth + 1)
        return
    assert isinstance(trace, CorroborationTrace)
    click.echo(f"{pad}{trace.proposition}"
               f" = {display_value(trace.belief.value)}"
               f" by {trace.kind.value} corroboration of"
               f" {len(trace.children)} rules")
    for child in trace.children:
        _render_trace(child, depth + 1)


@cli.command()
@click.argument("prop")
@click.option("--evidence", required=True, help="id=value,id=value,...")
@click.option("--policy", type=click.Choice(sorted(_POLICIES)),
              default="halt", show_default=True)
@click.pass_obj
def explain(doc_path: str, prop: str, evidence: str, policy: str) -> None:
    """Show the inference trace behind one proposition."""
    doc = _load(doc_path)
    _, traces = doc.evaluate(_evidence_pairs(evidence), _POLICIES[policy])
    _render_trace(explain_trace(traces, prop))


@cli.command()
@click.argument("table")
@click.option("--csv", "csv_path", required=True, type=click.Path())
@click.pass_obj
def export(doc_path: str, table: str, csv_path: str) -> None:
    """Write a table as CSV, plus a parallel .provenance.csv."""
    doc = _load(doc_path)
    target = Path(csv_path)
    t = doc._table(table)
    target.write_text(documents.export_csv(t), encoding="utf-8")
    if target.suffix == ".csv":
        sibling = target.with_name(target.stem + ".provenance.csv")
    else:
        sibling = target.with_name(target.name + ".provenance.csv")
    sibling.write_text(documents.export_provenance_csv(t), encoding="utf-8")
    click.echo(f"wrote {target} and {sibling}")


@cli.command()
@click.option("--bind", default="127.0.0.1:8765", show_default=True,
              help="host:port to listen on.")
@click.pass_obj
def serve(doc_path: str, bind: str) -> None:
    """Serve the document over HTTP for the editor UI."""
    from . import service

    store = DocumentStore.open(doc_path)
    click.echo(f"serving {doc_path} on http://{bind}")
    service.serve(store, bind)


def main() -> None:
    try:
        cli.main(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(130)
    except click.ClickException as err:
        err.show()
        sys.exit(2)
    except WorkbenchError as err:
        click.echo(f"error: {err.message}", err=True)
        sys.exit(err.exit_code)


if __name__ == "__main__":
    main()
