"""Ready-made example documents.

Three small knowledge bases used by ``mcf init --fixture``, by the demo
service, and by the test suite: a hand-built bipolar evidence grid, a
probability table derived from a categorical table, and a single-cell
plant-damage rule.
"""

from __future__ import annotations

from .beliefs import BIPOLAR, PROBABILITY, bipolar_axis, probability_axis
from .document import Document, RuleSpec
from .engine import Proposition
from .interpolate import Interpolator, InterpolatorKind
from .tables import make_categorical, make_region, mark_meaningless, \
    new_table, set_specified

# Hand-built 9x9 bipolar grid: rows are bel(E2) descending, columns are
# bel(E1) descending, None is blank.
DEMO_GRID: tuple[tuple[float | None, ...], ...] = (
    (1.0, 1.0, 0.75, 0.50, 0.0, None, None, None, None),
    (1.0, 1.0, 0.50, 0.25, 0.0, None, None, None, None),
    (0.50, 0.25, 0.0, 0.0, 0.0, None, None, None, None),
    (0.25, 0.0, 0.0, 0.0, 0.0, None, None, None, None),
    (0.0, 0.0, 0.0, 0.0, 0.0, None, None, None, None),
    (None, None, None, None, None, None, None, None, None),
    (None, None, None, None, None, None, None, None, None),
    (0.0, -0.50, -0.75, -0.75, -1.0, -1.0, -1.0, -1.0, -1.0),
    (0.0, -0.50, -0.75, -0.75, -1.0, -1.0, -1.0, -1.0, -1.0),
)

# The grid regularities written as acquisition rules.
DEMO_RULES = """\
# Quadrant and threshold regularities of the demo grid.
IF bel(E1) >= 0 AND bel(E2) <= 0 THEN bel(C) := 0
IF bel(E1) <= -.75 AND (bel(E2) = .5 OR bel(E2) = .25) THEN bel(C) := -.75
IF bel(E1) <= -.75 AND bel(E2) = .75 THEN bel(C) := -.5
"""

# Corner values acquired for the angina-history rule.
ANGINA_CORNERS: dict[tuple[int, ...], float] = {
    (1, 1): 1.0,
    (1, 0): 0.95,
    (0, 1): 0.25,
    (0, 0): 0.0,
}


def bipolar_demo_document() -> Document:
    """Two bipolar evidence sources combined by a hand-built table.

    43 cells are Specified, the rest are deliberately blank: the whole
    block where E1 is negative while E2 is nonnegative, plus the two
    middle rows.
    """
    doc = Document()
    table = new_table(
        "evidence_demo", (bipolar_axis("E1"), bipolar_axis("E2")),
        "C", BIPOLAR,
    )
    for r, row in enumerate(DEMO_GRID):
        for c, value in enumerate(row):
            if value is not None:
                table = set_specified(table, (c, r), value)
    table = mark_meaningless(table, make_region(
        table.axes, {"E1": ("<=", -0.25), "E2": (">=", 0.0)}))
    table = mark_meaningless(table, make_region(
        table.axes, {"E2": (-0.25, -0.50)}))
    doc.add_table(table)
    doc.add_rule_file("demo.mcr", DEMO_RULES)
    doc.add_proposition(Proposition("E1", "first evidence source", BIPOLAR))
    doc.add_proposition(Proposition("E2", "second evidence source", BIPOLAR))
    doc.add_proposition(Proposition("C", "combined conclusion", BIPOLAR))
    doc.add_rule(RuleSpec(
        id="demo_rule", premises=("E1", "E2"), conclusion="C",
        combiner_kind="table", table="evidence_demo", k=1.0,
    ))
    return doc


def angina_document(*, derived: bool = False) -> Document:
    """History-taking example: episode and risk factors support a history
    of angina. Corner beliefs come from four categorical rules; the full
    table is interpolated under an independence assumption.

    With ``derived=False`` the table is left empty so deriving it is the
    caller's first journaled step.
    """
    doc = Document()
    doc.add_table(new_table(
        "angina_history",
        (probability_axis("episode"), probability_axis("risk")),
        "angina_history", PROBABILITY,
    ))
    doc.add_categorical("angina_corners", make_categorical(ANGINA_CORNERS))
    doc.add_interpolator(
        Interpolator("bayes", InterpolatorKind.BAYES_INDEPENDENT))
    doc.add_proposition(Proposition(
        "episode", "the reported episode of chest pain is characteristic",
        PROBABILITY))
    doc.add_proposition(Proposition(
        "risk", "the patient has coronary risk factors", PROBABILITY))
    doc.add_proposition(Proposition(
        "angina_history", "the history is consistent with angina",
        PROBABILITY))
    doc.add_rule(RuleSpec(
        id="angina_rule", premises=("episode", "risk"),
        conclusion="angina_history", combiner_kind="interpolated",
        categorical="angina_corners", interpolator="bayes", k=1.0,
    ))
    if derived:
        doc.derive("angina_history", "angina_corners", "bayes")
    return doc


def plant_document() -> Document:
    """Single specified combination: heavy soil believed .7 and low soil
    oxygen believed .9 give water damage .8."""
    doc = Document()
    table = new_table(
        "water_damage",
        (bipolar_axis("soil_texture_heavy"), bipolar_axis("soil_oxygen_low")),
        "water_damage", BIPOLAR,
    )
    # (.7, .9) snaps to grid point (.75, 1.0), cell index (1, 0)
    table = set_specified(table, (1, 0), 0.8)
    doc.add_table(table)
    doc.add_proposition(Proposition(
        "soil_texture_heavy", "the soil texture is heavy", BIPOLAR))
    doc.add_proposition(Proposition(
        "soil_oxygen_low", "soil oxygen is low", BIPOLAR))
    doc.add_proposition(Proposition(
        "water_damage", "the plant shows water damage", BIPOLAR))
    doc.add_rule(RuleSpec(
        id="plant_rule", premises=("soil_texture_heavy", "soil_oxygen_low"),
        conclusion="water_damage", combiner_kind="table",
        table="water_damage",
    ))
    return doc


def standard_document(*, derived: bool = False) -> Document:
    """All three examples in one document."""
    doc = angina_document(derived=derived)
    for other in (bipolar_demo_document(), plant_document()):
        for axis in other.axes.values():
            doc.add_axis(axis)
        doc.tables.update(other.tables)
        doc.categorical.update(other.categorical)
        doc.interpolators.update(other.interpolators)
        doc.rules.update(other.rules)
        doc.propositions.update(other.propositions)
        doc.network_rules.extend(other.network_rules)
        doc.corroboration.update(other.corroboration)
    return doc


FIXTURES = {
    "angina": angina_document,
    "demo": bipolar_demo_document,
    "plant": plant_document,
    "all": standard_document,
}
