"""Modifiable combining functions.

Evidence-combination tables whose cells are mostly derived by an
interpolating function and selectively overridden by expert judgment,
with a rule DSL for block assertions, an inference engine, a revision
journal, and JSON persistence. ``mcf.cli`` and ``mcf.service`` expose
the same document over a command line and HTTP.
"""

from .beliefs import (
    BIPOLAR,
    PROBABILITY,
    Axis,
    BeliefScale,
    BeliefValue,
    LocateMode,
    ScaleKind,
    bipolar_axis,
    complement,
    display_value,
    locate,
    make_belief,
    probability_axis,
)
from .document import Document, RuleSpec, export_csv, export_provenance_csv, \
    from_json, load, save, to_json
from .engine import (
    BlankPolicy,
    CorroborationKind,
    CorroborationSpec,
    InferenceRule,
    InterpolatedCombiner,
    Proposition,
    TableCombiner,
    corroborate,
    evaluate_network,
    evaluate_rule,
    explain,
)
from .errors import WorkbenchError
from .interpolate import (
    Interpolator,
    InterpolatorKind,
    bayes_joint_point,
    bayes_point,
    derive_full,
    product_weights,
)
from .rules import apply as apply_rules, compile as compile_rules, \
    detect_conflicts, format_rules, parse_rules
from .tables import (
    CategoricalTable,
    Cell,
    CellChange,
    CombiningTable,
    LookupMode,
    LookupResult,
    Provenance,
    Region,
    corner_view,
    lookup,
    make_categorical,
    make_region,
    mark_meaningless,
    new_table,
    region_cells,
    set_specified,
)

__version__ = "1.0.0"
