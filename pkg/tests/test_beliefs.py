"""Scales, belief values, display rendering, and axis location."""

import math

import pytest
from hypothesis import given, strategies as st

from mcf.beliefs import (
    BIPOLAR,
    PROBABILITY,
    Ambiguous,
    Axis,
    BeliefValue,
    LocateMode,
    NotOnGrid,
    OutOfRange,
    ScaleMismatch,
    axis_value,
    bipolar_axis,
    complement,
    display_value,
    locate,
    make_belief,
    probability_axis,
    scale_by_name,
)


class TestScales:
    def test_bipolar_carries_an_ignorance_point(self):
        assert BIPOLAR.min == -1.0
        assert BIPOLAR.max == 1.0
        assert BIPOLAR.ignorance == 0.0

    def test_probability_has_no_ignorance_point(self):
        assert PROBABILITY.min == 0.0
        assert PROBABILITY.max == 1.0
        assert PROBABILITY.ignorance is None

    def test_scale_by_name(self):
        assert scale_by_name("bipolar") is BIPOLAR
        assert scale_by_name("probability") is PROBABILITY
        with pytest.raises(ScaleMismatch):
            scale_by_name("fuzzy")

    def test_contains_is_inclusive(self):
        assert BIPOLAR.contains(-1.0)
        assert BIPOLAR.contains(1.0)
        assert not BIPOLAR.contains(1.0000001)
        assert not PROBABILITY.contains(-0.1)


class TestMakeBelief:
    def test_accepts_in_range_values(self):
        b = make_belief(0.5, PROBABILITY)
        assert b == BeliefValue(0.5, PROBABILITY)

    def test_rejects_out_of_range(self):
        with pytest.raises(OutOfRange):
            make_belief(1.5, PROBABILITY)
        with pytest.raises(OutOfRange):
            make_belief(-0.001, PROBABILITY)
        with pytest.raises(OutOfRange):
            make_belief(-1.2, BIPOLAR)

    def test_rejects_nan(self):
        with pytest.raises(OutOfRange):
            make_belief(float("nan"), BIPOLAR)

    def test_complement_is_probability_only(self):
        b = make_belief(0.3, PROBABILITY)
        assert complement(b).value == pytest.approx(0.7)
        with pytest.raises(ScaleMismatch):
            complement(make_belief(0.3, BIPOLAR))

    @given(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
    def test_complement_is_an_involution(self, p):
        b = make_belief(p, PROBABILITY)
        assert complement(complement(b)).value == pytest.approx(p, abs=1e-15)


class TestDisplayValue:
    """Rendering: two decimals, half rounded up, no leading zero,
    integral values printed bare."""

    CASES = [
        (1.0, "1"),
        (0.0, "0"),
        (-1.0, "-1"),
        (0.5875, ".59"),
        (0.90625, ".91"),
        (0.3125, ".31"),
        (0.5, ".50"),
        (0.625, ".63"),
        (-0.75, "-.75"),
        (-0.5, "-.50"),
        (0.95, ".95"),
        (0.25, ".25"),
        (0.125, ".13"),
        (-0.125, "-.13"),
        (2.0, "2"),
        (-2.0, "-2"),
    ]

    @pytest.mark.parametrize("value,expected", CASES)
    def test_frozen_renderings(self, value, expected):
        assert display_value(value) == expected

    def test_representation_noise_is_absorbed(self):
        # .1 + .05 is not exactly .15 in binary floating point
        assert display_value(0.1 + 0.05) == ".15"
        assert display_value(0.15000000000000002) == ".15"

    def test_half_rounds_up_away_from_zero(self):
        assert display_value(0.005) == ".01"
        assert display_value(-0.005) == "-.01"
        assert display_value(0.015) == ".02"

    @given(st.floats(min_value=-1.0, max_value=1.0, allow_nan=False))
    def test_rendering_stays_within_half_a_cent(self, v):
        # the noise-absorbing first quantisation can add up to 5e-9
        text = display_value(v)
        assert float(text) == pytest.approx(v, abs=0.005 + 1e-8)

    @given(st.floats(min_value=-1.0, max_value=1.0, allow_nan=False))
    def test_no_leading_zero_ever(self, v):
        text = display_value(v)
        assert not text.startswith("0.")
        assert not text.startswith("-0.")


class TestAxisInvariants:
    def test_default_bipolar_axis(self):
        axis = bipolar_axis("E1")
        assert axis.proposition == "E1"
        assert axis.levels == (1.0, 0.75, 0.5, 0.25, 0.0, -0.25, -0.5, -0.75, -1.0)
        assert len(axis) == 9

    def test_default_probability_axis(self):
        axis = probability_axis("p")
        assert axis.levels == (1.0, 0.875, 0.75, 0.625, 0.5, 0.375, 0.25, 0.125, 0.0)

    def test_levels_must_strictly_descend(self):
        with pytest.raises(OutOfRange):
            Axis("x", PROBABILITY, (1.0, 0.5, 0.5, 0.0))
        with pytest.raises(OutOfRange):
            Axis("x", PROBABILITY, (1.0, 0.25, 0.5, 0.0))

    def test_endpoints_must_hit_the_scale_extremes(self):
        # without extreme endpoints some coordinates could not be bracketed
        with pytest.raises(OutOfRange):
            Axis("x", PROBABILITY, (0.875, 0.5, 0.0))
        with pytest.raises(OutOfRange):
            Axis("x", PROBABILITY, (1.0, 0.5, 0.125))

    def test_needs_two_levels_and_an_id(self):
        with pytest.raises(OutOfRange):
            Axis("x", PROBABILITY, (1.0,))
        with pytest.raises(OutOfRange):
            Axis("", PROBABILITY, (1.0, 0.0))

    def test_two_point_axis_is_legal(self):
        axis = Axis("x", BIPOLAR, (1.0, -1.0))
        assert len(axis) == 2


class TestAxisValue:
    def test_wrong_scale_belief_is_rejected(self):
        axis = probability_axis("p")
        with pytest.raises(ScaleMismatch):
            axis_value(axis, make_belief(0.5, BIPOLAR))

    def test_matching_belief_unwraps(self):
        axis = probability_axis("p")
        assert axis_value(axis, make_belief(0.5, PROBABILITY)) == 0.5

    def test_raw_float_is_range_checked(self):
        axis = probability_axis("p")
        assert axis_value(axis, 0.3) == 0.3
        with pytest.raises(OutOfRange):
            axis_value(axis, -0.3)
        with pytest.raises(OutOfRange):
            axis_value(axis, math.nan)


class TestLocate:
    def setup_method(self):
        self.axis = bipolar_axis("E1")

    def test_exact_hits(self):
        assert locate(self.axis, 1.0, LocateMode.EXACT) == 0
        assert locate(self.axis, 0.0, LocateMode.EXACT) == 4
        assert locate(self.axis, -1.0, LocateMode.EXACT) == 8

    def test_exact_misses_raise(self):
        with pytest.raises(NotOnGrid):
            locate(self.axis, 0.6, LocateMode.EXACT)

    def test_tolerance_absorbs_tiny_noise(self):
        assert locate(self.axis, 0.25 + 1e-12, LocateMode.EXACT) == 3

    def test_snap_picks_the_nearest_level(self):
        assert locate(self.axis, 0.7, LocateMode.SNAP) == 1
        assert locate(self.axis, 0.9, LocateMode.SNAP) == 0
        assert locate(self.axis, -0.3, LocateMode.SNAP) == 5

    def test_snap_at_the_exact_midpoint_is_ambiguous(self):
        with pytest.raises(Ambiguous):
            locate(self.axis, 0.125, LocateMode.SNAP)
        with pytest.raises(Ambiguous):
            locate(self.axis, -0.875, LocateMode.SNAP)

    def test_snap_on_grid_is_never_ambiguous(self):
        for i, level in enumerate(self.axis.levels):
            assert locate(self.axis, level, LocateMode.SNAP) == i

    def test_bracket_returns_the_surrounding_pair(self):
        assert locate(self.axis, 0.6, LocateMode.BRACKET) == (1, 2)
        assert locate(self.axis, -0.9, LocateMode.BRACKET) == (7, 8)

    def test_bracket_collapses_on_grid(self):
        assert locate(self.axis, 0.75, LocateMode.BRACKET) == (1, 1)

    @given(st.floats(min_value=-1.0, max_value=1.0, allow_nan=False))
    def test_bracket_is_total_and_ordered(self, v):
        i, j = locate(self.axis, v, LocateMode.BRACKET)
        assert j in (i, i + 1)
        assert self.axis.levels[i] + 1e-9 >= v >= self.axis.levels[j] - 1e-9

    @given(st.floats(min_value=-1.0, max_value=1.0, allow_nan=False))
    def test_snap_minimises_distance_when_unambiguous(self, v):
        try:
            i = locate(self.axis, v, LocateMode.SNAP)
        except Ambiguous:
            return
        best = min(abs(level - v) for level in self.axis.levels)
        assert abs(self.axis.levels[i] - v) <= best + 1e-9
