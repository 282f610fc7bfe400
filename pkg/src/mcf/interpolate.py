"""Interpolating combining functions.

The independent form is the multilinear evidence-combination rule

    value(p) = sum over corners c in {0,1}^N of V(c) * prod_i w_i(c_i)

with w_i(1) = p_i and w_i(0) = 1 - p_i. For N = 2 this reduces to the
familiar total-probability expansion over the four corner cases. The joint
variant drops the independence assumption and takes the 2^N corner weights
directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .beliefs import PROBABILITY, BeliefValue, ScaleKind, make_belief
from .errors import ArityMismatch, BadWeights, MissingCorners, ScaleMismatch
from .tables import (
    CategoricalTable,
    CombiningTable,
    Provenance,
    corner_order,
    derived,
)

WEIGHT_TOL = 1e-9


def _probabilities(values: Iterable[BeliefValue | float]) -> tuple[float, ...]:
    probs = []
    for v in values:
        if isinstance(v, BeliefValue):
            if v.scale.kind is not ScaleKind.PROBABILITY:
                raise ScaleMismatch("interpolation weights must be probabilities")
            probs.append(v.value)
        else:
            probs.append(make_belief(float(v), PROBABILITY).value)
    return tuple(probs)


def product_weights(probs: Iterable[BeliefValue | float]) -> dict[tuple[int, ...], float]:
    """Corner weights under independence: w(c) = prod_i (p_i if c_i else 1-p_i)."""
    probs = _probabilities(probs)
    weights = {}
    for corner in corner_order(len(probs)):
        w = 1.0
        for bit, p in zip(corner, probs):
            w *= p if bit else 1.0 - p
        weights[corner] = w
    return weights


def _require_complete(cat: CategoricalTable) -> None:
    missing = cat.missing()
    if missing:
        raise MissingCorners(
            f"{len(missing)} corner(s) missing: cannot interpolate from an "
            "incomplete categorical table", missing
        )


def bayes_point(cat: CategoricalTable, probs: Iterable[BeliefValue | float]) -> float:
    """Evaluate the independent multilinear form at a probability vector."""
    probs = _probabilities(probs)
    if len(probs) != cat.arity:
        raise ArityMismatch(
            f"{len(probs)} probabilities for a categorical table of arity {cat.arity}"
        )
    _require_complete(cat)
    total = 0.0
    for corner, weight in product_weights(probs).items():
        total += cat.corners[corner] * weight
    return total


def bayes_joint_point(cat: CategoricalTable,
                      joint: Mapping[tuple[int, ...], float]) -> float:
    """Evaluate with explicit corner weights (no independence assumption)."""
    joint = {tuple(c): float(w) for c, w in joint.items()}
    if set(joint) != set(cat.corners):
        raise BadWeights("joint weights must cover every corner exactly once")
    total_weight = 0.0
    for corner, w in joint.items():
        if w < 0:
            raise BadWeights(f"negative weight {w} at corner {corner}", w)
        total_weight += w
    if abs(total_weight - 1.0) > WEIGHT_TOL:
        raise BadWeights(f"joint weights sum to {total_weight}, not 1", total_weight)
    _require_complete(cat)
    return sum(cat.corners[c] * w for c, w in joint.items())


class InterpolatorKind(str, Enum):
    BAYES_INDEPENDENT = "bayes_independent"
    BAYES_JOINT = "bayes_joint"


@dataclass(frozen=True)
class Interpolator:
    """A named interpolating function. Both kinds work on the probability
    scale; bipolar tables are never interpolated implicitly."""

    id: str
    kind: InterpolatorKind
    joint: Mapping[tuple[int, ...], float] | None = None

    def __post_init__(self):
        if self.kind is InterpolatorKind.BAYES_JOINT:
            if self.joint is None:
                raise BadWeights(f"interpolator {self.id!r} needs joint weights")
            total = 0.0
            for corner, w in self.joint.items():
                if w < 0:
                    raise BadWeights(f"negative weight {w} at corner {corner}", w)
                total += w
            if abs(total - 1.0) > WEIGHT_TOL:
                raise BadWeights(f"joint weights sum to {total}, not 1", total)
        elif self.joint is not None:
            raise BadWeights("only the joint kind carries joint weights")

    def value_at(self, cat: CategoricalTable,
                 probs: Iterable[BeliefValue | float]) -> float:
        if self.kind is InterpolatorKind.BAYES_INDEPENDENT:
            return bayes_point(cat, probs)
        return bayes_joint_point(cat, self.joint)


def _check_interpolable(table: CombiningTable, cat: CategoricalTable) -> None:
    if cat.arity != len(table.axes):
        raise ArityMismatch(
            f"categorical arity {cat.arity} does not match table arity "
            f"{len(table.axes)}"
        )
    for axis in table.axes:
        if axis.scale.kind is not ScaleKind.PROBABILITY:
            raise ScaleMismatch(
                f"axis {axis.proposition!r} is {axis.scale.kind.value}; Bayesian "
                "interpolation needs probability axes"
            )
    if table.conclusion_scale.kind is not ScaleKind.PROBABILITY:
        raise ScaleMismatch(
            f"table {table.id!r} concludes on a {table.conclusion_scale.kind.value} "
            "scale; Bayesian interpolation needs a probability conclusion"
        )


def derive_full(table: CombiningTable, cat: CategoricalTable,
                interp: Interpolator) -> CombiningTable:
    """Fill every Unspecified cell (and refresh every Derived cell) from
    the categorical table. IntendedBlank, Specified, and Overridden cells
    are untouched: derivation never invents values for cells the expert
    left blank or already settled.
    """
    _check_interpolable(table, cat)
    _require_complete(cat)
    updates = {}
    for index in table.indices():
        cell = table.cell(index)
        if cell.state not in (Provenance.UNSPECIFIED, Provenance.DERIVED):
            continue
        value = interp.value_at(cat, table.levels_at(index))
        new = derived(value, interp.id)
        if new != cell:
            updates[index] = new
    return table.with_cells(updates)


def recompute_derived(table: CombiningTable, cat: CategoricalTable,
                      interp: Interpolator) -> CombiningTable:
    """Recompute only the cells that are already Derived. Used when a
    corner or the interpolator changes; everything else keeps its state."""
    _check_interpolable(table, cat)
    derived_indices = [ix for ix in table.indices()
                       if table.cell(ix).state is Provenance.DERIVED]
    if not derived_indices:
        return table
    _require_complete(cat)
    updates = {}
    for index in derived_indices:
        value = interp.value_at(cat, table.levels_at(index))
        new = derived(value, interp.id)
        if new != table.cell(index):
            updates[index] = new
    return table.with_cells(updates)
