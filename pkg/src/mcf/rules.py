"""The region-rule DSL: rules that assert values for blocks of table cells.

Surface syntax, one rule per statement, "#" starts a line comment:

    IF bel(E1) >= 0 AND bel(E2) <= 0 THEN bel(C) := 0
    IF bel(E1) <= -.75 AND (bel(E2) = .5 OR bel(E2) = .25) THEN bel(C) := -.75

Keywords are case-insensitive. Inequality constants may sit off the grid
(they are thresholds); equality constants must name an exact grid level.
Disjunctions are restricted to atoms over a single proposition.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .beliefs import LEVEL_TOL, Axis, BeliefScale, LocateMode, locate
from .errors import (
    ConflictsPresent,
    EqualityOffGrid,
    NotOnGrid,
    OutOfRange,
    ParseError,
    UnknownProposition,
)
from .tables import CellChange, CombiningTable, Region, region_indices, specified


@dataclass(frozen=True)
class Comparison:
    proposition: str
    op: str  # one of >= <= = > <
    value: float


@dataclass(frozen=True)
class Disjunction:
    atoms: tuple[Comparison, ...]  # every atom tests the same proposition


Condition = Comparison | Disjunction


@dataclass(frozen=True)
class Rule:
    conditions: tuple[Condition, ...]
    conclusion: str
    value: float


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]


_KEYWORDS = {"if", "and", "or", "then", "bel"}

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)"
    r"|(?P<comment>#[^\n]*)"
    r"|(?P<nl>\n)"
    r"|(?P<num>[+-]?(?:\d+\.\d*|\.\d+|\d+))"
    r"|(?P<op>>=|<=|:=|=|>|<)"
    r"|(?P<lp>\()"
    r"|(?P<rp>\))"
    r"|(?P<word>[A-Za-z_][A-Za-z0-9_\-]*)"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # NUM OP ASSIGN LP RP WORD KW EOF
    text: str
    value: float | None
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(
                f"line {line}, column {col}: unexpected character {text[pos]!r}",
                line, col, ["token"]
            )
        pos = m.end()
        if m.lastgroup == "nl":
            line += 1
            col = 1
            continue
        width = len(m.group())
        if m.lastgroup in ("ws", "comment"):
            col += width
            continue
        start = col
        col += width
        raw = m.group()
        if m.lastgroup == "num":
            tokens.append(_Token("NUM", raw, float(raw), line, start))
        elif m.lastgroup == "op":
            kind = "ASSIGN" if raw == ":=" else "OP"
            tokens.append(_Token(kind, raw, None, line, start))
        elif m.lastgroup == "lp":
            tokens.append(_Token("LP", raw, None, line, start))
        elif m.lastgroup == "rp":
            tokens.append(_Token("RP", raw, None, line, start))
        else:
            kind = "KW" if raw.lower() in _KEYWORDS else "WORD"
            tokens.append(_Token(kind, raw, None, line, start))
    tokens.append(_Token("EOF", "", None, line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def here(self) -> _Token:
        return self.tokens[self.pos]

    def _fail(self, expected: list[str]) -> ParseError:
        tok = self.here
        found = "end of input" if tok.kind == "EOF" else repr(tok.text)
        return ParseError(
            f"line {tok.line}, column {tok.column}: expected "
            f"{' or '.join(expected)}, found {found}",
            tok.line, tok.column, expected
        )

    def _keyword(self, word: str) -> _Token:
        tok = self.here
        if tok.kind == "KW" and tok.text.lower() == word:
            self.pos += 1
            return tok
        raise self._fail([word.upper()])

    def _at_keyword(self, word: str) -> bool:
        tok = self.here
        return tok.kind == "KW" and tok.text.lower() == word

    def _take(self, kind: str, expected: str) -> _Token:
        tok = self.here
        if tok.kind != kind:
            raise self._fail([expected])
        self.pos += 1
        return tok

    def _bel_ref(self) -> str:
        self._keyword("bel")
        self._take("LP", "(")
        tok = self.here
        if tok.kind not in ("WORD", "KW"):
            raise self._fail(["proposition id"])
        self.pos += 1
        self._take("RP", ")")
        return tok.text

    def _atom(self) -> Comparison:
        prop = self._bel_ref()
        op = self._take("OP", "comparison operator")
        num = self._take("NUM", "number")
        return Comparison(prop, op.text, num.value)

    def _condition(self) -> Condition:
        if self.here.kind == "LP":
            self.pos += 1
            first_tok = self.here
            atoms = [self._atom()]
            self._keyword("or")
            atoms.append(self._atom())
            while self._at_keyword("or"):
                self.pos += 1
                atoms.append(self._atom())
            self._take("RP", ")")
            props = {a.proposition for a in atoms}
            if len(props) > 1:
                raise ParseError(
                    f"line {first_tok.line}, column {first_tok.column}: "
                    f"a disjunction must test a single proposition, got "
                    f"{sorted(props)}",
                    first_tok.line, first_tok.column, ["single proposition"]
                )
            return Disjunction(tuple(atoms))
        return self._atom()

    def _rule(self) -> Rule:
        self._keyword("if")
        conditions = [self._condition()]
        while self._at_keyword("and"):
            self.pos += 1
            conditions.append(self._condition())
        self._keyword("then")
        conclusion = self._bel_ref()
        self._take("ASSIGN", ":=")
        num = self._take("NUM", "number")
        return Rule(tuple(conditions), conclusion, num.value)

    def parse(self) -> RuleSet:
        rules = []
        while self.here.kind != "EOF":
            rules.append(self._rule())
        return RuleSet(tuple(rules))


def parse_rules(text: str) -> RuleSet:
    """Parse rule text, preserving rule order. A file of only comments and
    whitespace parses to the empty RuleSet."""
    return _Parser(_tokenize(text)).parse()


def _format_number(v: float) -> str:
    s = repr(float(v))
    if s.endswith(".0"):
        s = s[:-2]
    if "e" in s or "E" in s:
        s = f"{v:.12f}".rstrip("0").rstrip(".")
    return s


def _format_atom(atom: Comparison) -> str:
    return f"bel({atom.proposition}) {atom.op} {_format_number(atom.value)}"


def _format_condition(cond: Condition) -> str:
    if isinstance(cond, Disjunction):
        return "(" + " OR ".join(_format_atom(a) for a in cond.atoms) + ")"
    return _format_atom(cond)


def format_rules(ruleset: RuleSet) -> str:
    """Canonical text; parse_rules(format_rules(rs)) is structurally rs."""
    lines = []
    for rule in ruleset.rules:
        conds = " AND ".join(_format_condition(c) for c in rule.conditions)
        lines.append(
            f"IF {conds} THEN bel({rule.conclusion}) := "
            f"{_format_number(rule.value)}"
        )
    if not lines:
        return ""
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CompiledAssignment:
    region: Region
    value: float
    rule_index: int


def _atom_levels(axis: Axis, atom: Comparison) -> set[float]:
    op, x = atom.op, atom.value
    if op == "=":
        try:
            i = locate(axis, x, LocateMode.EXACT)
        except NotOnGrid:
            raise EqualityOffGrid(
                f"bel({atom.proposition}) = {_format_number(x)}: {x} is not a "
                f"grid level; equality needs an exact level", x
            ) from None
        except OutOfRange:
            raise EqualityOffGrid(
                f"bel({atom.proposition}) = {_format_number(x)}: {x} is outside "
                f"the axis scale", x
            ) from None
        return {axis.levels[i]}
    if op == "<=":
        return {lv for lv in axis.levels if lv <= x + LEVEL_TOL}
    if op == ">=":
        return {lv for lv in axis.levels if lv >= x - LEVEL_TOL}
    if op == "<":
        return {lv for lv in axis.levels if lv < x - LEVEL_TOL}
    return {lv for lv in axis.levels if lv > x + LEVEL_TOL}


def compile(ruleset: RuleSet, axes: Iterable[Axis], *,
            conclusion: str | None = None,
            conclusion_scale: BeliefScale | None = None) -> list[CompiledAssignment]:
    """Compile each rule to the region of grid cells satisfying all of its
    conditions. Pass the target table's conclusion id and scale to validate
    assignments against them."""
    axes = tuple(axes)
    by_prop = {axis.proposition: i for i, axis in enumerate(axes)}
    compiled = []
    for rule_index, rule in enumerate(ruleset.rules):
        if conclusion is not None and rule.conclusion != conclusion:
            raise UnknownProposition(
                f"rule {rule_index + 1} concludes bel({rule.conclusion}), "
                f"table concludes bel({conclusion})"
            )
        if conclusion_scale is not None and not conclusion_scale.contains(rule.value):
            raise OutOfRange(
                f"rule {rule_index + 1} assigns {_format_number(rule.value)}, "
                f"outside the conclusion scale"
            )
        allowed: list[set[float] | None] = [None] * len(axes)
        for cond in rule.conditions:
            atoms = cond.atoms if isinstance(cond, Disjunction) else (cond,)
            prop = atoms[0].proposition
            if prop not in by_prop:
                raise UnknownProposition(
                    f"rule {rule_index + 1} tests bel({prop}), which has no axis"
                )
            axis_i = by_prop[prop]
            axis = axes[axis_i]
            levels: set[float] = set()
            for atom in atoms:
                levels |= _atom_levels(axis, atom)
            if allowed[axis_i] is None:
                allowed[axis_i] = levels
            else:
                allowed[axis_i] &= levels
        selections = tuple(
            None if lv is None else tuple(sorted(lv, reverse=True))
            for lv in allowed
        )
        compiled.append(CompiledAssignment(Region(selections), rule.value, rule_index))
    return compiled


@dataclass(frozen=True)
class Conflict:
    index: tuple[int, ...]
    values: tuple[float, ...]
    rule_indices: tuple[int, ...]


def detect_conflicts(assignments: Sequence[CompiledAssignment],
                     axes: Iterable[Axis]) -> list[Conflict]:
    """Cells assigned two or more distinct values. Agreeing assignments
    are not conflicts."""
    axes = tuple(axes)
    seen: dict[tuple[int, ...], list[CompiledAssignment]] = {}
    for assignment in assignments:
        for ix in region_indices(axes, assignment.region):
            seen.setdefault(ix, []).append(assignment)
    conflicts = []
    for ix in sorted(seen):
        hits = seen[ix]
        values = sorted({a.value for a in hits})
        if len(values) > 1:
            conflicts.append(Conflict(
                ix, tuple(values), tuple(a.rule_index for a in hits)
            ))
    return conflicts


@dataclass(frozen=True)
class ApplyResult:
    table: CombiningTable
    changes: tuple[CellChange, ...]


def apply(table: CombiningTable,
          assignments: Sequence[CompiledAssignment]) -> ApplyResult:
    """Write every matched cell as Specified(value). Conflicting
    assignments are a hard error: silent precedence would hide exactly the
    distinctions the rules are meant to draw. The change summary reports
    what each write displaced, including prior overrides."""
    conflicts = detect_conflicts(assignments, table.axes)
    if conflicts:
        raise ConflictsPresent(
            f"{len(conflicts)} cell(s) assigned conflicting values", conflicts
        )
    updates: dict[tuple[int, ...], tuple[float, int]] = {}
    for assignment in assignments:
        for ix in region_indices(table.axes, assignment.region):
            updates[ix] = (assignment.value, assignment.rule_index)
    changes = []
    new_cells = {}
    for ix in sorted(updates):
        value, rule_index = updates[ix]
        after = specified(value, note=f"rule {rule_index + 1}")
        before = table.cell(ix)
        if before != after:
            new_cells[ix] = after
            changes.append(CellChange(ix, before, after))
    return ApplyResult(table.with_cells(new_cells), tuple(changes))
