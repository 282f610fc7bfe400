"""Documents: journaled mutation, history, persistence, CSV export."""

import json

import pytest

from mcf.beliefs import BIPOLAR, PROBABILITY, bipolar_axis, make_belief, \
    probability_axis
from mcf.document import (
    Document,
    RuleSpec,
    export_csv,
    export_provenance_csv,
    from_json,
    from_payload,
    load,
    save,
    to_json,
    to_payload,
)
from mcf.engine import BlankPolicy, Proposition
from mcf.errors import (
    BlankEncountered,
    NotRevertible,
    SchemaError,
    StaleJournalHead,
    UnknownId,
    UnknownProposition,
    VersionUnsupported,
    WouldEraseExpertCells,
)
from mcf.fixtures import (
    DEMO_RULES,
    angina_document,
    bipolar_demo_document,
    plant_document,
    standard_document,
)
from mcf.interpolate import Interpolator, InterpolatorKind
from mcf.tables import Provenance, new_table

JOINT = Interpolator(
    "fixed", InterpolatorKind.BAYES_JOINT,
    joint={(1, 1): 0.45, (1, 0): 0.05, (0, 1): 0.30, (0, 0): 0.20})


class TestAuthoring:
    def test_add_table_registers_its_axes(self):
        doc = plant_document()
        assert set(doc.axes) == {"soil_texture_heavy", "soil_oxygen_low"}

    def test_conflicting_axis_definitions_rejected(self):
        doc = plant_document()
        with pytest.raises(SchemaError):
            doc.add_axis(probability_axis("soil_texture_heavy"))
        doc.add_axis(bipolar_axis("soil_texture_heavy"))  # identical is fine

    def test_rule_files_must_parse(self):
        doc = Document()
        with pytest.raises(Exception):
            doc.add_rule_file("bad.mcr", "IF bel(x THEN")

    def test_rules_must_reference_known_ids(self):
        doc = plant_document()
        with pytest.raises(UnknownProposition):
            doc.add_rule(RuleSpec(
                id="r", premises=("nope",), conclusion="water_damage",
                combiner_kind="table", table="water_damage"))
        with pytest.raises(UnknownId):
            doc.add_rule(RuleSpec(
                id="r", premises=("soil_texture_heavy", "soil_oxygen_low"),
                conclusion="water_damage", combiner_kind="table",
                table="missing"))


class TestJournalBookkeeping:
    def test_entry_ids_count_up_from_e1(self):
        doc = angina_document()
        entry, _ = doc.derive("angina_history")
        assert entry.id == "e1"
        entry2 = doc.override_cell("angina_history", (4, 2), 0.75)
        assert entry2.id == "e2"
        assert doc.head() == "e2"

    def test_head_of_an_empty_journal_is_none(self):
        assert angina_document().head() is None

    def test_expected_head_guards_mutation(self):
        doc = angina_document()
        doc.derive("angina_history", expected_head="")
        with pytest.raises(StaleJournalHead):
            doc.override_cell("angina_history", (0, 0), 0.5, expected_head="")
        doc.override_cell("angina_history", (0, 0), 0.5, expected_head="e1")
        # None skips the check entirely
        doc.override_cell("angina_history", (0, 1), 0.5, expected_head=None)

    def test_binding_is_recorded_by_derive(self):
        doc = angina_document()
        _, filled = doc.derive("angina_history")
        assert filled == 81
        assert doc.bindings["angina_history"] == ("angina_corners", "bayes")

    def test_derive_resolves_singletons_implicitly(self):
        doc = angina_document()
        entry, _ = doc.derive("angina_history")
        assert entry.payload["categorical"] == "angina_corners"
        assert entry.payload["interpolator"] == "bayes"

    def test_mark_meaningless_protects_expert_cells(self):
        doc = angina_document(derived=True)
        doc.override_cell("angina_history", (7, 0), 0.9)
        with pytest.raises(WouldEraseExpertCells):
            doc.mark_meaningless("angina_history", {"episode": ("<=", 0.2)})

    def test_apply_rules_records_the_file(self):
        doc = bipolar_demo_document()
        entry, changes = doc.apply_rules(
            "evidence_demo", DEMO_RULES, "demo.mcr")
        assert entry.payload["file"] == "demo.mcr"
        assert entry.payload["text"] == DEMO_RULES
        assert entry.payload["file_before"] == DEMO_RULES
        assert len(changes) == 31


class TestRevert:
    def test_revert_restores_cells(self):
        doc = angina_document(derived=True)
        before = doc.tables["angina_history"]
        doc.override_cell("angina_history", (4, 2), 0.75)
        entry = doc.revert("e2")
        assert entry.kind == "revert"
        assert entry.payload["of"] == "e2"
        assert doc.tables["angina_history"] == before

    def test_only_the_latest_toucher_is_revertible(self):
        doc = angina_document(derived=True)
        doc.override_cell("angina_history", (4, 2), 0.75)
        doc.override_cell("angina_history", (4, 2), 0.8)
        with pytest.raises(NotRevertible) as err:
            doc.revert("e2")
        assert err.value.conflicting_entries == ["e3"]

    def test_disjoint_edits_do_not_block_revert(self):
        doc = angina_document(derived=True)
        doc.override_cell("angina_history", (4, 2), 0.75)
        doc.override_cell("angina_history", (0, 1), 0.8)
        doc.revert("e2")
        assert doc.tables["angina_history"].cell((4, 2)).state \
            is Provenance.DERIVED
        assert doc.tables["angina_history"].cell((0, 1)).value == 0.8

    def test_revert_of_a_derive_restores_the_binding(self):
        doc = angina_document()
        doc.derive("angina_history")
        doc.revert("e1")
        assert doc.bindings["angina_history"] == (None, None)
        table = doc.tables["angina_history"]
        assert all(table.cell(ix).is_blank for ix in table.indices())

    def test_rederiving_blocks_reverting_the_first_derive(self):
        doc = angina_document()
        doc.add_interpolator(JOINT)
        doc.derive("angina_history", "angina_corners", "bayes")
        doc.swap_interpolator("angina_history", "fixed")
        with pytest.raises(NotRevertible):
            doc.revert("e1")

    def test_revert_of_apply_rules_restores_the_file(self):
        doc = bipolar_demo_document()
        doc.apply_rules("evidence_demo",
                        "IF bel(E1) = 1 AND bel(E2) = 1 THEN bel(C) := 1\n",
                        "extra.mcr")
        assert "extra.mcr" in doc.rules
        doc.revert("e1")
        assert "extra.mcr" not in doc.rules

    def test_unknown_entry(self):
        with pytest.raises(UnknownId):
            angina_document().revert("e9")

    def test_reverts_can_stack(self):
        doc = angina_document(derived=True)
        doc.override_cell("angina_history", (4, 2), 0.75)
        doc.revert("e2")
        doc.revert("e3")
        assert doc.tables["angina_history"].cell((4, 2)).value == 0.75


class TestHistory:
    def build(self):
        doc = angina_document(derived=True)
        doc.override_cell("angina_history", (4, 2), 0.75)
        doc.override_cell("angina_history", (0, 1), 0.9)
        return doc

    def test_table_as_of_none_is_virgin(self):
        doc = self.build()
        table = doc.table_as_of("angina_history", None)
        assert all(table.cell(ix).is_blank for ix in table.indices())
        assert doc.table_as_of("angina_history", "initial") == table

    def test_table_as_of_each_entry(self):
        doc = self.build()
        after_derive = doc.table_as_of("angina_history", "e1")
        assert after_derive.cell((4, 2)).state is Provenance.DERIVED
        after_first = doc.table_as_of("angina_history", "e2")
        assert after_first.cell((4, 2)).value == 0.75
        assert after_first.cell((0, 1)).state is Provenance.DERIVED
        assert doc.table_as_of("angina_history", "e3") \
            == doc.tables["angina_history"]

    def test_unknown_entry(self):
        with pytest.raises(UnknownId):
            self.build().table_as_of("angina_history", "e9")

    def test_initial_document_strips_history(self):
        doc = self.build()
        initial = doc.initial_document()
        assert initial.journal == []
        assert initial.bindings == {}
        table = initial.tables["angina_history"]
        assert all(table.cell(ix).is_blank for ix in table.indices())
        # authored, unjournaled content survives
        assert initial.propositions.keys() == doc.propositions.keys()


def full_history_document():
    """One document that exercises every journal entry kind."""
    doc = standard_document()
    doc.add_interpolator(JOINT)
    doc.derive("angina_history", "angina_corners", "bayes")         # e1
    doc.set_cell("angina_history", (1, 1), 0.9, "hand check")       # e2
    doc.override_cell("angina_history", (4, 2), 0.75, "challenged") # e3
    doc.override_block(                                             # e4
        "angina_history", {"episode": (0.625, 0.5), "risk": (">=", 0.625)},
        0.75, "block fix")
    doc.mark_meaningless("angina_history", {"risk": (0.375, 0.25)}) # e5
    doc.apply_rules("evidence_demo", DEMO_RULES, "demo.mcr")        # e6
    doc.edit_corner("angina_history", (0, 1), 0.35, note="raised")  # e7
    doc.swap_interpolator("angina_history", "fixed")                # e8
    doc.clear_override("angina_history", (4, 2))                    # e9
    doc.revert("e9")                                                # e10
    return doc


class TestReplay:
    def test_replay_covers_every_entry_kind(self):
        doc = full_history_document()
        assert [e.kind for e in doc.journal] == [
            "derive", "set_cell", "override_cell", "override_block",
            "mark_meaningless", "apply_rules", "edit_corner",
            "swap_interpolator", "clear_override", "revert",
        ]

    def test_replay_reproduces_the_document_byte_for_byte(self):
        doc = full_history_document()
        assert to_json(doc.replay()) == to_json(doc)

    def test_replay_survives_a_json_round_trip(self):
        doc = from_json(to_json(full_history_document()))
        assert to_json(doc.replay()) == to_json(doc)


class TestPersistence:
    def test_round_trip_is_stable(self):
        text = to_json(full_history_document())
        assert to_json(from_json(text)) == text
        assert text.endswith("\n")

    def test_canonical_layout(self):
        text = to_json(standard_document())
        payload = json.loads(text)
        assert set(payload) == {
            "version", "scales", "axes", "tables", "categorical",
            "interpolators", "rules", "network", "corroboration", "journal",
        }
        assert text == json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def test_save_and_load(self, tmp_path):
        path = tmp_path / "knowledge.mcf.json"
        doc = full_history_document()
        written = save(doc, path)
        assert written == path.stat().st_size
        assert to_json(load(path)) == to_json(doc)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(SchemaError) as err:
            load(tmp_path / "absent.mcf.json")
        assert "cannot read" in err.value.message

    def test_unknown_fields_survive_round_trips(self):
        payload = json.loads(to_json(angina_document(derived=True)))
        payload["x-workbench"] = {"zoom": 2}
        payload["tables"]["angina_history"]["x-color"] = "teal"
        payload["journal"][0]["x-reviewed"] = True
        doc = from_payload(payload)
        again = to_payload(doc)
        assert again["x-workbench"] == {"zoom": 2}
        assert again["tables"]["angina_history"]["x-color"] == "teal"
        assert again["journal"][0]["x-reviewed"] is True

    def test_version_must_be_major_one(self):
        payload = json.loads(to_json(angina_document()))
        payload["version"] = "2.0"
        with pytest.raises(VersionUnsupported):
            from_payload(payload)

    def test_minor_versions_are_tolerated(self):
        payload = json.loads(to_json(angina_document()))
        payload["version"] = "1.9"
        assert from_payload(payload).version == "1.9"

    def test_missing_version(self):
        with pytest.raises(SchemaError) as err:
            from_payload({})
        assert err.value.path == "version"

    def test_not_json(self):
        with pytest.raises(SchemaError):
            from_json("{nope")

    def test_malformed_cell_reports_its_path(self):
        payload = json.loads(to_json(angina_document(derived=True)))
        payload["tables"]["angina_history"]["cells"][3] = ["D", 0.5]
        with pytest.raises(SchemaError) as err:
            from_payload(payload)
        assert err.value.path == "tables.angina_history.cells[3]"

    def test_unknown_axis_reference(self):
        payload = json.loads(to_json(angina_document()))
        payload["tables"]["angina_history"]["axes"] = ["episode", "ghost"]
        with pytest.raises(SchemaError):
            from_payload(payload)

    def test_altered_scale_definition_rejected(self):
        payload = json.loads(to_json(angina_document()))
        payload["scales"]["bipolar"]["ignorance"] = 0.5
        with pytest.raises(SchemaError):
            from_payload(payload)

    def test_rule_files_validated_on_load(self):
        payload = json.loads(to_json(bipolar_demo_document()))
        payload["rules"]["demo.mcr"] = "IF bel( THEN"
        with pytest.raises(SchemaError) as err:
            from_payload(payload)
        assert err.value.path == "rules.demo.mcr"

    def test_bad_corner_key(self):
        payload = json.loads(to_json(angina_document()))
        payload["categorical"]["angina_corners"]["corners"]["12"] = 0.5
        with pytest.raises(SchemaError):
            from_payload(payload)

    def test_wrong_cell_count(self):
        payload = json.loads(to_json(angina_document()))
        payload["tables"]["angina_history"]["cells"] = [["U"]] * 80
        with pytest.raises(SchemaError):
            from_payload(payload)


class TestCsvExport:
    def test_values_render_like_the_printed_tables(self):
        doc = angina_document(derived=True)
        lines = export_csv(doc.tables["angina_history"]).splitlines()
        assert lines[0] == ",1,0.875,0.75,0.625,0.5,0.375,0.25,0.125,0"
        assert lines[1] == "1,1,.91,.81,.72,.63,.53,.44,.34,.25"
        assert lines[9] == "0,.95,.83,.71,.59,.48,.36,.24,.12,0"

    def test_blanks_are_empty_fields(self):
        doc = bipolar_demo_document()
        lines = export_csv(doc.tables["evidence_demo"]).splitlines()
        # the all-blank middle rows render as bare commas
        assert lines[6] == "-0.25,,,,,,,,,"

    def test_provenance_codes(self):
        doc = angina_document(derived=True)
        doc.override_cell("angina_history", (4, 2), 0.75)
        lines = export_provenance_csv(
            doc.tables["angina_history"]).splitlines()
        assert lines[0] == ",1,0.875,0.75,0.625,0.5,0.375,0.25,0.125,0"
        assert lines[1] == "1,D,D,D,D,D,D,D,D,D"
        # the override sits at episode index 4, risk index 2
        assert lines[3].split(",")[5] == "O"

    def test_one_dimensional_tables_export_two_lines(self):
        table = new_table("mono", (probability_axis("p"),), "c", PROBABILITY)
        lines = export_csv(table).splitlines()
        assert lines[0] == "1,0.875,0.75,0.625,0.5,0.375,0.25,0.125,0"
        assert lines[1] == ",,,,,,,,"


class TestEvaluate:
    def test_floats_are_coerced_through_proposition_scales(self):
        doc = standard_document(derived=True)
        env, traces = doc.evaluate({"episode": 0.5, "risk": 0.75})
        assert env["angina_history"].value == pytest.approx(0.5875, abs=1e-12)

    def test_belief_values_pass_through(self):
        doc = standard_document(derived=True)
        env, _ = doc.evaluate({
            "episode": make_belief(0.5, PROBABILITY),
            "risk": make_belief(0.75, PROBABILITY),
        })
        assert env["angina_history"].value == pytest.approx(0.5875, abs=1e-12)

    def test_unknown_proposition(self):
        with pytest.raises(UnknownProposition):
            standard_document().evaluate({"ghost": 0.5})

    def test_blank_policy_flows_through(self):
        doc = standard_document(derived=True)
        evidence = {"E1": -1.0, "E2": 1.0}
        with pytest.raises(BlankEncountered):
            doc.evaluate(evidence)
        env, _ = doc.evaluate(evidence, BlankPolicy.TREAT_AS_IGNORANCE)
        assert env["C"].value == 0.0

    def test_demo_and_plant_rules_fire(self):
        doc = standard_document(derived=True)
        env, _ = doc.evaluate({
            "E1": 1.0, "E2": 0.75,
            "soil_texture_heavy": 0.7, "soil_oxygen_low": 0.9,
        })
        assert env["C"].value == 1.0
        assert env["water_damage"].value == pytest.approx(0.8)
