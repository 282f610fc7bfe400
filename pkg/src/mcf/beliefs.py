"""Belief scales, belief values, and the grid axes built over them.

Two scales are supported: a bipolar scale on [-1, 1] whose midpoint 0 means
total ignorance, and a probability scale on [0, 1] which has no ignorance
point. An Axis discretises one proposition's scale into a strictly
descending list of levels; tables and rule regions are defined over axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum

from .errors import Ambiguous, NotOnGrid, OutOfRange, ScaleMismatch

# Tolerance for comparing grid levels. Coordinates closer than this to a
# level are considered on it; a snap tie is only declared when the point is
# within the tolerance of the exact midpoint between two levels.
LEVEL_TOL = 1e-9


class ScaleKind(str, Enum):
    BIPOLAR = "bipolar"
    PROBABILITY = "probability"


@dataclass(frozen=True)
class BeliefScale:
    kind: ScaleKind
    min: float
    max: float
    ignorance: float | None

    def contains(self, value: float) -> bool:
        return self.min <= value <= self.max


BIPOLAR = BeliefScale(ScaleKind.BIPOLAR, -1.0, 1.0, 0.0)
PROBABILITY = BeliefScale(ScaleKind.PROBABILITY, 0.0, 1.0, None)

_SCALES = {ScaleKind.BIPOLAR: BIPOLAR, ScaleKind.PROBABILITY: PROBABILITY}


def scale_by_name(name: str) -> BeliefScale:
    try:
        return _SCALES[ScaleKind(name)]
    except ValueError:
        raise ScaleMismatch(f"unknown scale {name!r}") from None


@dataclass(frozen=True)
class BeliefValue:
    value: float
    scale: BeliefScale


def make_belief(value: float, scale: BeliefScale) -> BeliefValue:
    value = float(value)
    if math.isnan(value) or not scale.contains(value):
        raise OutOfRange(
            f"{value!r} outside {scale.kind.value} scale [{scale.min}, {scale.max}]"
        )
    return BeliefValue(value, scale)


def complement(belief: BeliefValue) -> BeliefValue:
    """P(not A) for a probability-scale belief."""
    if belief.scale.kind is not ScaleKind.PROBABILITY:
        raise ScaleMismatch("complement is defined on the probability scale only")
    return BeliefValue(1.0 - belief.value, belief.scale)


def display_value(value: float) -> str:
    """Render a belief for table output: two decimals, half rounded up,
    no leading zero, integral values bare.

    A first quantisation at 1e-8 absorbs float representation noise so a
    value like 0.15000000000000002 still rounds as .15 would.
    """
    d = Decimal(repr(float(value)))
    d = d.quantize(Decimal("1e-8"), rounding=ROUND_HALF_UP)
    d = d.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    if d == d.to_integral_value():
        return str(int(d))
    text = f"{d:.2f}"
    if text.startswith("0."):
        return text[1:]
    if text.startswith("-0."):
        return "-" + text[2:]
    return text


class LocateMode(Enum):
    EXACT = "exact"
    SNAP = "snap"
    BRACKET = "bracket"


@dataclass(frozen=True)
class Axis:
    """One proposition's belief scale cut into strictly descending levels.

    The first level must be the scale maximum and the last the scale
    minimum, so any in-range coordinate can be bracketed.
    """

    proposition: str
    scale: BeliefScale
    levels: tuple[float, ...]

    def __post_init__(self):
        if not self.proposition:
            raise OutOfRange("axis needs a proposition id")
        if len(self.levels) < 2:
            raise OutOfRange("axis needs at least two levels")
        for a, b in zip(self.levels, self.levels[1:]):
            if not b < a:
                raise OutOfRange(f"axis levels must strictly descend, got {a} then {b}")
        if abs(self.levels[0] - self.scale.max) > LEVEL_TOL:
            raise OutOfRange("first axis level must be the scale maximum")
        if abs(self.levels[-1] - self.scale.min) > LEVEL_TOL:
            raise OutOfRange("last axis level must be the scale minimum")

    def __len__(self) -> int:
        return len(self.levels)


def bipolar_axis(proposition: str) -> Axis:
    """Default 9-level bipolar grid in .25 steps."""
    return Axis(proposition, BIPOLAR, tuple(1.0 - i * 0.25 for i in range(9)))


def probability_axis(proposition: str) -> Axis:
    """Default 9-level probability grid in .125 steps."""
    return Axis(proposition, PROBABILITY, tuple((8 - i) / 8 for i in range(9)))


def axis_value(axis: Axis, value: BeliefValue | float) -> float:
    """Validate a coordinate against an axis and return the bare float."""
    if isinstance(value, BeliefValue):
        if value.scale != axis.scale:
            raise ScaleMismatch(
                f"axis {axis.proposition!r} is {axis.scale.kind.value}, "
                f"value is {value.scale.kind.value}"
            )
        return value.value
    raw = float(value)
    if math.isnan(raw) or not axis.scale.contains(raw):
        raise OutOfRange(
            f"{raw!r} outside {axis.scale.kind.value} scale "
            f"[{axis.scale.min}, {axis.scale.max}]"
        )
    return raw


def locate(axis: Axis, value: BeliefValue | float,
           mode: LocateMode = LocateMode.EXACT) -> int | tuple[int, int]:
    """Map a coordinate to axis indices.

    EXACT and SNAP return a single index; BRACKET returns a pair (i, j)
    with levels[i] >= value >= levels[j]. On-grid coordinates bracket with
    i == j.
    """
    raw = axis_value(axis, value)

    exact = None
    for i, level in enumerate(axis.levels):
        if abs(level - raw) <= LEVEL_TOL:
            exact = i
            break

    if mode is LocateMode.EXACT:
        if exact is None:
            raise NotOnGrid(f"{raw} is not a level of axis {axis.proposition!r}")
        return exact

    if mode is LocateMode.SNAP:
        if exact is not None:
            return exact
        best = min(range(len(axis.levels)), key=lambda i: abs(axis.levels[i] - raw))
        dist = abs(axis.levels[best] - raw)
        for i, level in enumerate(axis.levels):
            if i != best and abs(abs(level - raw) - dist) <= LEVEL_TOL:
                raise Ambiguous(
                    f"{raw} is midway between levels {axis.levels[best]} and "
                    f"{level} of axis {axis.proposition!r}"
                )
        return best

    if exact is not None:
        return (exact, exact)
    # levels descend, so walk until the value fits between neighbours
    for i in range(len(axis.levels) - 1):
        if axis.levels[i] > raw > axis.levels[i + 1]:
            return (i, i + 1)
    raise NotOnGrid(f"{raw} cannot be bracketed on axis {axis.proposition!r}")
