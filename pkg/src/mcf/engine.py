"""Inference rules, rule networks, corroboration, and explanation traces.

A rule combines premise beliefs into a conclusion belief through either a
combining table or an interpolating function. Conclusions feed later rules;
evaluation runs in topological order over an acyclic rule graph. When two
or more rules corroborate one conclusion, an explicit corroboration
function resolves them; there is no silent default.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Union

from .beliefs import PROBABILITY, BeliefScale, BeliefValue, ScaleKind, make_belief
from .errors import (
    Ambiguous,
    AmbiguousCorroboration,
    ArityMismatch,
    BlankEncountered,
    CycleDetected,
    MissingEvidence,
    NotEvaluated,
    NotOnGrid,
    RuleStrengthMismatch,
    ScaleMismatch,
    UnknownId,
)
from .interpolate import Interpolator, InterpolatorKind, bayes_point, product_weights
from .tables import (
    CategoricalTable,
    CombiningTable,
    LookupMode,
    LookupResult,
    corner_view,
    lookup,
)

K_TOL = 1e-9


@dataclass(frozen=True)
class Proposition:
    id: str
    statement: str
    scale: BeliefScale


@dataclass(frozen=True)
class TableCombiner:
    table_id: str


@dataclass(frozen=True)
class InterpolatedCombiner:
    categorical: CategoricalTable
    interpolator: Interpolator


Combiner = Union[TableCombiner, InterpolatedCombiner]


@dataclass(frozen=True)
class InferenceRule:
    """IF premises THEN conclusion, combined by a table or an interpolator.

    k, when present, is the belief in the rule itself: the conclusion
    belief under fully-believed premises. It is validated against the
    all-true corner, never applied as a multiplier (the corner already
    carries it)."""

    id: str
    premises: tuple[str, ...]
    conclusion: str
    combiner: Combiner
    k: float | None = None


class CorroborationKind(str, Enum):
    MAX = "max"
    MIN = "min"
    PROBABILISTIC_SUM = "probabilistic_sum"
    TABLE = "table"


@dataclass(frozen=True)
class CorroborationSpec:
    conclusion: str
    kind: CorroborationKind
    table_id: str | None = None


class BlankPolicy(Enum):
    """What a blank cell means at inference time: treat it as total
    ignorance (bipolar scales only), or halt and alert the user."""

    TREAT_AS_IGNORANCE = "treat_as_ignorance"
    HALT = "halt"


@dataclass(frozen=True)
class LookupRecord:
    table_id: str
    result: LookupResult


@dataclass(frozen=True)
class InterpolationRecord:
    corners: Mapping[tuple[int, ...], float]
    weights: Mapping[tuple[int, ...], float]
    value: float


@dataclass(frozen=True)
class EvidenceTrace:
    proposition: str
    belief: BeliefValue


@dataclass(frozen=True)
class RuleTrace:
    rule_id: str
    proposition: str
    premises: tuple["Trace", ...]
    record: LookupRecord | InterpolationRecord
    belief: BeliefValue


@dataclass(frozen=True)
class CorroborationTrace:
    proposition: str
    kind: CorroborationKind
    children: tuple[RuleTrace, ...]
    record: LookupRecord | None
    belief: BeliefValue


Trace = Union[EvidenceTrace, RuleTrace, CorroborationTrace]

Tables = Mapping[str, CombiningTable]


def _get_table(tables: Tables | None, table_id: str) -> CombiningTable:
    if tables is None or table_id not in tables:
        raise UnknownId(f"no table {table_id!r}")
    return tables[table_id]


def _lookup_with_fallback(table: CombiningTable,
                          point: list[BeliefValue]) -> LookupResult:
    # Exact first so expert-entered cells dominate on-grid queries, then
    # Snap, then Continuous. Only mode errors fall through; a blank result
    # is an answer, not a miss.
    try:
        return lookup(table, point, LookupMode.EXACT)
    except NotOnGrid:
        pass
    try:
        return lookup(table, point, LookupMode.SNAP)
    except (Ambiguous, NotOnGrid):
        pass
    return lookup(table, point, LookupMode.CONTINUOUS)


def _resolve_blank(result: LookupResult, scale: BeliefScale, table_id: str,
                   policy: BlankPolicy) -> BeliefValue:
    index = next((c.index for c in result.contributors if c.cell.is_blank), None)
    if policy is BlankPolicy.TREAT_AS_IGNORANCE:
        if scale.ignorance is None:
            raise BlankEncountered(
                f"blank cell in table {table_id!r}: the {scale.kind.value} scale "
                "has no ignorance value to substitute",
                table_id=table_id, index=index,
            )
        return BeliefValue(scale.ignorance, scale)
    raise BlankEncountered(
        f"blank cell at {index} in table {table_id!r}",
        table_id=table_id, index=index,
    )


def rule_strength(rule: InferenceRule, tables: Tables | None = None) -> float | None:
    """The all-true corner value, if defined."""
    if isinstance(rule.combiner, TableCombiner):
        table = _get_table(tables, rule.combiner.table_id)
        corners = corner_view(table)
    else:
        corners = rule.combiner.categorical
    return corners.corners.get((1,) * corners.arity)


def validate_rule(rule: InferenceRule, tables: Tables | None = None) -> None:
    if isinstance(rule.combiner, TableCombiner):
        arity = len(_get_table(tables, rule.combiner.table_id).axes)
    else:
        arity = rule.combiner.categorical.arity
    if len(rule.premises) != arity:
        raise ArityMismatch(
            f"rule {rule.id!r} has {len(rule.premises)} premises for a "
            f"combiner of arity {arity}"
        )
    if rule.k is not None:
        corner = rule_strength(rule, tables)
        if corner is not None and abs(corner - rule.k) > K_TOL:
            raise RuleStrengthMismatch(
                f"rule {rule.id!r} declares k = {rule.k} but its all-true "
                f"corner is {corner}"
            )


def _evaluate_rule(rule: InferenceRule, env: Mapping[str, BeliefValue],
                   policy: BlankPolicy, tables: Tables | None,
                   child_traces: Mapping[str, Trace]) -> tuple[BeliefValue, RuleTrace]:
    missing = [p for p in rule.premises if p not in env]
    if missing:
        raise MissingEvidence(
            f"rule {rule.id!r} is missing evidence for {missing}", missing
        )
    validate_rule(rule, tables)
    point = [env[p] for p in rule.premises]

    if isinstance(rule.combiner, TableCombiner):
        table = _get_table(tables, rule.combiner.table_id)
        result = _lookup_with_fallback(table, point)
        record = LookupRecord(table.id, result)
        if result.blank:
            belief = _resolve_blank(result, table.conclusion_scale, table.id, policy)
        else:
            belief = make_belief(result.value, table.conclusion_scale)
    else:
        cat = rule.combiner.categorical
        interp = rule.combiner.interpolator
        value = interp.value_at(cat, point)
        if interp.kind is InterpolatorKind.BAYES_INDEPENDENT:
            weights = product_weights(point)
        else:
            weights = dict(interp.joint)
        record = InterpolationRecord(dict(cat.corners), weights, value)
        belief = make_belief(value, PROBABILITY)

    premises = tuple(
        child_traces.get(p, EvidenceTrace(p, env[p])) for p in rule.premises
    )
    trace = RuleTrace(rule.id, rule.conclusion, premises, record, belief)
    return belief, trace


def evaluate_rule(rule: InferenceRule, env: Mapping[str, BeliefValue],
                  policy: BlankPolicy = BlankPolicy.HALT, *,
                  tables: Tables | None = None) -> tuple[BeliefValue, RuleTrace]:
    """Evaluate one rule against an evidence environment."""
    return _evaluate_rule(rule, env, policy, tables, {})


def corroborate(values: Iterable[BeliefValue], spec: CorroborationSpec, *,
                tables: Tables | None = None,
                policy: BlankPolicy = BlankPolicy.HALT,
                ) -> tuple[BeliefValue, LookupRecord | None]:
    """Combine the outputs of rules that conclude the same proposition."""
    values = list(values)
    if not values:
        raise ArityMismatch("nothing to corroborate")
    scale = values[0].scale
    for v in values:
        if v.scale != scale:
            raise ScaleMismatch("corroborated beliefs must share one scale")

    if spec.kind is CorroborationKind.MAX:
        return BeliefValue(max(v.value for v in values), scale), None
    if spec.kind is CorroborationKind.MIN:
        return BeliefValue(min(v.value for v in values), scale), None
    if spec.kind is CorroborationKind.PROBABILISTIC_SUM:
        if scale.kind is not ScaleKind.PROBABILITY:
            raise ScaleMismatch(
                "probabilistic sum is defined on the probability scale only"
            )
        remainder = 1.0
        for v in values:
            remainder *= 1.0 - v.value
        return BeliefValue(1.0 - remainder, scale), None

    table = _get_table(tables, spec.table_id or "")
    if len(table.axes) != len(values):
        raise ArityMismatch(
            f"corroboration table {table.id!r} has arity {len(table.axes)}, "
            f"got {len(values)} rule outputs"
        )
    result = _lookup_with_fallback(table, values)
    record = LookupRecord(table.id, result)
    if result.blank:
        return _resolve_blank(result, table.conclusion_scale, table.id, policy), record
    return make_belief(result.value, table.conclusion_scale), record


def _check_acyclic(rules: Iterable[InferenceRule]) -> None:
    edges: dict[str, set[str]] = {}
    for rule in rules:
        for p in rule.premises:
            edges.setdefault(p, set()).add(rule.conclusion)
    state: dict[str, int] = {}  # 1 visiting, 2 done
    stack: list[str] = []

    def visit(node: str) -> None:
        state[node] = 1
        stack.append(node)
        for nxt in sorted(edges.get(node, ())):
            if state.get(nxt) == 1:
                cycle = stack[stack.index(nxt):] + [nxt]
                raise CycleDetected(
                    f"rule dependencies form a cycle: {' -> '.join(cycle)}", cycle
                )
            if nxt not in state:
                visit(nxt)
        stack.pop()
        state[node] = 2

    for node in sorted(edges):
        if node not in state:
            visit(node)


def evaluate_network(rules: Iterable[InferenceRule],
                     corroborations: Mapping[str, CorroborationSpec],
                     base_env: Mapping[str, BeliefValue],
                     policy: BlankPolicy = BlankPolicy.HALT, *,
                     tables: Tables | None = None,
                     ) -> tuple[dict[str, BeliefValue], dict[str, Trace]]:
    """Propagate base evidence through an acyclic rule network.

    Returns the extended environment and one trace per evaluated
    proposition. Conclusions whose premises never resolve are skipped.
    Base evidence wins: a rule never overwrites a belief given as input.
    """
    rules = list(rules)
    _check_acyclic(rules)

    env: dict[str, BeliefValue] = dict(base_env)
    traces: dict[str, Trace] = {
        p: EvidenceTrace(p, b) for p, b in base_env.items()
    }

    pending = [r for r in rules if r.conclusion not in env]
    while True:
        ready: dict[str, list[InferenceRule]] = {}
        for rule in pending:
            if all(p in env for p in rule.premises):
                ready.setdefault(rule.conclusion, []).append(rule)
        if not ready:
            break
        # acyclicity guarantees progress; sorted order makes ties deterministic
        for conclusion in sorted(ready):
            group = ready[conclusion]
            evaluated = [
                _evaluate_rule(rule, env, policy, tables, traces)
                for rule in group
            ]
            if len(evaluated) == 1:
                belief, trace = evaluated[0]
                env[conclusion] = belief
                traces[conclusion] = trace
            else:
                spec = corroborations.get(conclusion)
                if spec is None:
                    raise AmbiguousCorroboration(
                        f"{len(evaluated)} rules conclude {conclusion!r} and no "
                        "corroboration function is specified"
                    )
                belief, record = corroborate(
                    [b for b, _ in evaluated], spec, tables=tables, policy=policy
                )
                env[conclusion] = belief
                traces[conclusion] = CorroborationTrace(
                    conclusion, spec.kind, tuple(t for _, t in evaluated),
                    record, belief,
                )
        pending = [r for r in pending if r.conclusion not in env]
    return env, traces


def explain(traces: Mapping[str, Trace], proposition: str) -> Trace:
    if proposition not in traces:
        raise NotEvaluated(f"{proposition!r} was not evaluated")
    return traces[proposition]
