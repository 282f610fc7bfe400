"""Combining tables: cells, regions, blanking, lookup, corner views."""

import pytest
from hypothesis import given, strategies as st

from mcf.beliefs import PROBABILITY, probability_axis
from mcf.errors import (
    Ambiguous,
    ArityMismatch,
    DuplicateAxis,
    MissingCorners,
    NotOnGrid,
    OutOfRange,
    ShapeMismatch,
    WouldEraseExpertCells,
)
from mcf.tables import (
    INTENDED_BLANK_CELL,
    UNSPECIFIED_CELL,
    Cell,
    CombiningTable,
    LookupMode,
    Provenance,
    Region,
    corner_index,
    corner_order,
    corner_view,
    derived,
    lookup,
    make_categorical,
    make_region,
    mark_meaningless,
    new_table,
    overridden,
    region_cells,
    region_indices,
    set_specified,
    specified,
)


def fresh_table(table_id="t"):
    return new_table(
        table_id, (probability_axis("a"), probability_axis("b")), "c", PROBABILITY
    )


class TestCells:
    def test_blank_states_carry_no_value(self):
        assert UNSPECIFIED_CELL.is_blank
        assert INTENDED_BLANK_CELL.is_blank
        with pytest.raises(OutOfRange):
            Cell(Provenance.UNSPECIFIED, 0.5)
        with pytest.raises(OutOfRange):
            Cell(Provenance.INTENDED_BLANK, 0.0)

    def test_value_states_need_a_value(self):
        with pytest.raises(OutOfRange):
            Cell(Provenance.SPECIFIED)
        with pytest.raises(OutOfRange):
            Cell(Provenance.DERIVED, interpolator="bayes")

    def test_derived_records_its_interpolator(self):
        cell = derived(0.5, "bayes")
        assert cell.interpolator == "bayes"
        with pytest.raises(OutOfRange):
            Cell(Provenance.DERIVED, 0.5)
        with pytest.raises(OutOfRange):
            Cell(Provenance.SPECIFIED, 0.5, interpolator="bayes")

    def test_overridden_records_its_journal_entry(self):
        cell = overridden(0.5, "e3", "fixed by hand")
        assert cell.entry == "e3"
        assert cell.note == "fixed by hand"
        with pytest.raises(OutOfRange):
            Cell(Provenance.OVERRIDDEN, 0.5)
        with pytest.raises(OutOfRange):
            Cell(Provenance.SPECIFIED, 0.5, entry="e3")

    def test_blank_is_not_zero(self):
        # a blank and an explicit zero are different cells
        assert specified(0.0) != UNSPECIFIED_CELL
        assert specified(0.0) != INTENDED_BLANK_CELL


class TestTableShape:
    def test_shape_and_size(self):
        table = fresh_table()
        assert table.shape == (9, 9)
        assert table.size == 81

    def test_offset_is_row_major(self):
        table = fresh_table()
        assert table.offset((0, 0)) == 0
        assert table.offset((0, 8)) == 8
        assert table.offset((1, 0)) == 9
        assert table.offset((8, 8)) == 80

    def test_offset_bounds_checks(self):
        table = fresh_table()
        with pytest.raises(OutOfRange):
            table.offset((9, 0))
        with pytest.raises(ArityMismatch):
            table.offset((1, 2, 3))

    def test_levels_at(self):
        table = fresh_table()
        assert table.levels_at((0, 0)) == (1.0, 1.0)
        assert table.levels_at((4, 2)) == (0.5, 0.75)

    def test_indices_row_major(self):
        table = fresh_table()
        first = list(table.indices())[:3]
        assert first == [(0, 0), (0, 1), (0, 2)]
        assert list(table.indices())[-1] == (8, 8)

    def test_duplicate_axes_rejected(self):
        with pytest.raises(DuplicateAxis):
            new_table("t", (probability_axis("a"), probability_axis("a")),
                      "c", PROBABILITY)

    def test_cell_count_validated(self):
        with pytest.raises(ShapeMismatch):
            CombiningTable(
                "t", (probability_axis("a"),), "c", PROBABILITY,
                (UNSPECIFIED_CELL,) * 5,
            )

    def test_cell_values_checked_against_conclusion_scale(self):
        with pytest.raises(OutOfRange):
            CombiningTable(
                "t", (probability_axis("a"),), "c", PROBABILITY,
                (specified(-0.5),) + (UNSPECIFIED_CELL,) * 8,
            )

    def test_with_cells_leaves_the_original_alone(self):
        table = fresh_table()
        updated = table.with_cells({(0, 0): specified(1.0)})
        assert table.cell((0, 0)).is_blank
        assert updated.cell((0, 0)).value == 1.0

    def test_set_specified_range_checks(self):
        table = fresh_table()
        with pytest.raises(OutOfRange):
            set_specified(table, (0, 0), 1.5)


class TestRegions:
    def setup_method(self):
        self.table = fresh_table()
        self.axes = self.table.axes

    def test_empty_spec_selects_everything(self):
        region = make_region(self.axes, {})
        assert region.selections == (None, None)
        assert len(region_indices(self.axes, region)) == 81

    def test_bare_number_is_an_exact_level(self):
        region = make_region(self.axes, {"a": 0.5})
        assert region.selections[0] == (0.5,)
        assert len(region_indices(self.axes, region)) == 9

    def test_exact_off_grid_fails_eagerly(self):
        with pytest.raises(NotOnGrid):
            make_region(self.axes, {"a": 0.3})

    def test_unknown_proposition_rejected(self):
        with pytest.raises(NotOnGrid):
            make_region(self.axes, {"zz": 0.5})

    def test_threshold_predicates_may_sit_off_grid(self):
        region = make_region(self.axes, {"a": ("<=", 0.3)})
        assert region.selections[0] == (0.25, 0.125, 0.0)
        region = make_region(self.axes, {"a": (">=", 0.8)})
        assert region.selections[0] == (1.0, 0.875)

    def test_member_of_stores_levels_descending(self):
        region = make_region(self.axes, {"b": (0.125, 0.875, 0.5)})
        assert region.selections[1] == (0.875, 0.5, 0.125)

    def test_region_indices_row_major(self):
        region = make_region(self.axes, {"a": (1.0, 0.875), "b": (0.125, 0.0)})
        assert region_indices(self.axes, region) == [
            (0, 7), (0, 8), (1, 7), (1, 8)
        ]

    def test_region_arity_checked(self):
        with pytest.raises(ShapeMismatch):
            region_indices(self.axes, Region((None,)))

    def test_region_cells_pairs_indices_with_cells(self):
        table = set_specified(self.table, (0, 8), 0.25)
        region = make_region(self.axes, {"a": 1.0, "b": 0.0})
        assert region_cells(table, region) == [((0, 8), table.cell((0, 8)))]


class TestMarkMeaningless:
    def test_blanks_unspecified_and_derived_cells(self):
        table = fresh_table().with_cells({(0, 0): derived(0.9, "bayes")})
        marked = mark_meaningless(
            table, make_region(table.axes, {"a": 1.0}))
        assert marked.cell((0, 0)) is INTENDED_BLANK_CELL
        assert marked.cell((0, 5)) is INTENDED_BLANK_CELL

    def test_refuses_to_erase_expert_cells(self):
        table = set_specified(fresh_table(), (0, 3), 0.75)
        with pytest.raises(WouldEraseExpertCells) as err:
            mark_meaningless(table, make_region(table.axes, {"a": 1.0}))
        assert (0, 3) in err.value.indices

    def test_aborts_atomically(self):
        # a protected cell anywhere in the region stops every write
        table = set_specified(fresh_table(), (0, 3), 0.75)
        try:
            mark_meaningless(table, make_region(table.axes, {"a": 1.0}))
        except WouldEraseExpertCells:
            pass
        assert table.cell((0, 0)) is UNSPECIFIED_CELL

    def test_already_blank_cells_stay_blank(self):
        table = fresh_table()
        marked = mark_meaningless(table, make_region(table.axes, {"a": 1.0}))
        again = mark_meaningless(marked, make_region(table.axes, {"a": 1.0}))
        assert again.cell((0, 4)) is INTENDED_BLANK_CELL


class TestLookup:
    def setup_method(self):
        self.table = fresh_table()
        for i in range(9):
            for j in range(9):
                self.table = self.table.with_cells(
                    {(i, j): derived((8 - i) * (8 - j) / 64.0, "unit")}
                )

    def test_exact_on_grid(self):
        result = lookup(self.table, (1.0, 1.0), LookupMode.EXACT)
        assert result.is_value
        assert result.value == 1.0
        assert result.provenance is Provenance.DERIVED
        assert result.mode is LookupMode.EXACT
        assert result.contributors[0].index == (0, 0)

    def test_exact_off_grid_raises(self):
        with pytest.raises(NotOnGrid):
            lookup(self.table, (0.3, 1.0), LookupMode.EXACT)

    def test_snap_rounds_each_coordinate(self):
        result = lookup(self.table, (0.9, 0.1), LookupMode.SNAP)
        assert result.contributors[0].index == (1, 7)
        assert result.value == self.table.cell((1, 7)).value

    def test_snap_midpoint_is_ambiguous(self):
        with pytest.raises(Ambiguous):
            lookup(self.table, (0.8125, 1.0), LookupMode.SNAP)

    def test_continuous_blends_the_surrounding_cells(self):
        # product surface: the blend reproduces the product exactly
        result = lookup(self.table, (0.9, 0.3), LookupMode.CONTINUOUS)
        assert result.value == pytest.approx(0.9 * 0.3, abs=1e-12)
        assert result.provenance is None
        assert len(result.contributors) == 4
        assert [c.index for c in result.contributors] == sorted(
            c.index for c in result.contributors
        )
        assert sum(c.weight for c in result.contributors) == pytest.approx(1.0)

    def test_continuous_collapses_on_grid(self):
        result = lookup(self.table, (0.5, 0.75), LookupMode.CONTINUOUS)
        assert result.value == pytest.approx(0.5 * 0.75, abs=1e-12)
        assert len(result.contributors) == 1

    def test_blank_results_are_never_numbers(self):
        table = self.table.with_cells({(0, 0): UNSPECIFIED_CELL})
        result = lookup(table, (1.0, 1.0), LookupMode.EXACT)
        assert result.blank
        assert result.value is None
        assert result.blank_reason is Provenance.UNSPECIFIED
        assert not result.is_value

    def test_continuous_goes_blank_when_any_neighbour_is_blank(self):
        table = self.table.with_cells({(0, 0): INTENDED_BLANK_CELL})
        result = lookup(table, (0.9, 0.9), LookupMode.CONTINUOUS)
        assert result.blank
        assert result.blank_reason is Provenance.INTENDED_BLANK

    def test_arity_checked(self):
        with pytest.raises(ArityMismatch):
            lookup(self.table, (0.5,), LookupMode.EXACT)

    @given(st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
           st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
    def test_continuous_reproduces_the_product_surface(self, x, y):
        result = lookup(self.table, (x, y), LookupMode.CONTINUOUS)
        assert result.value == pytest.approx(x * y, abs=1e-9)


class TestCategorical:
    def test_corner_order_all_true_first(self):
        assert corner_order(2) == [(1, 1), (1, 0), (0, 1), (0, 0)]
        assert corner_order(1) == [(1,), (0,)]

    def test_make_categorical_infers_arity(self):
        cat = make_categorical({(1, 1): 1.0, (1, 0): 0.95, (0, 1): 0.25,
                                (0, 0): 0.0})
        assert cat.arity == 2
        assert cat.complete
        assert cat.missing() == []

    def test_missing_corners_tracked(self):
        cat = make_categorical({(1, 1): 1.0, (1, 0): None, (0, 1): 0.25,
                                (0, 0): 0.0})
        assert not cat.complete
        assert cat.missing() == [(1, 0)]
        with pytest.raises(MissingCorners):
            cat.value((1, 0))

    def test_incomplete_corner_sets_rejected(self):
        with pytest.raises(ShapeMismatch):
            make_categorical({(1, 1): 1.0, (0, 0): 0.0})

    def test_with_corner(self):
        cat = make_categorical({(1,): 1.0, (0,): 0.0})
        updated = cat.with_corner((0,), 0.5)
        assert updated.corners[(0,)] == 0.5
        assert cat.corners[(0,)] == 0.0
        with pytest.raises(ShapeMismatch):
            cat.with_corner((0, 1), 0.5)

    def test_corner_index_maps_bits_to_extremes(self):
        table = fresh_table()
        assert corner_index(table, (1, 1)) == (0, 0)
        assert corner_index(table, (1, 0)) == (0, 8)
        assert corner_index(table, (0, 1)) == (8, 0)
        assert corner_index(table, (0, 0)) == (8, 8)
        with pytest.raises(ArityMismatch):
            corner_index(table, (1,))

    def test_corner_view_reads_extreme_cells(self):
        table = fresh_table()
        table = set_specified(table, (0, 0), 1.0)
        table = set_specified(table, (8, 8), 0.0)
        view = corner_view(table)
        assert view.corners[(1, 1)] == 1.0
        assert view.corners[(0, 0)] == 0.0
        assert view.corners[(1, 0)] is None
        assert view.missing() == [(1, 0), (0, 1)]
