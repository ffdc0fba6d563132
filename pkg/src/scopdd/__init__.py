"""Stochastic constraint optimization over ordered binary decision diagrams.

Monotone probabilistic events are compiled into reduced ordered decision
diagrams; a derivative-based propagator enforces domain consistency on
threshold constraints over them in time linear in the diagram, and a
branch-and-prune search solves satisfaction and threshold-ramping
optimization problems.  A naive re-evaluation propagator and an interval
propagator on the circuit decomposition are included as reference points.
"""

from .errors import CapacityError, ParseError, ScopddError, StructureError
from .obdd import (
    AND,
    Cube,
    DECISION,
    FALSE_NODE,
    OR,
    Obdd,
    STOCHASTIC,
    TRUE_NODE,
    VariableTable,
    VarInfo,
    dump_dot,
    dump_obdd,
    from_dnf,
    load_obdd,
    validate,
)
from .evaluate import (
    BOTH,
    DomainState,
    FALSE_ONLY,
    TRUE_ONLY,
    evaluate,
    model_probability,
)
from .propagate import (
    ConstraintTerm,
    FAILED,
    OK,
    PropagationResult,
    PropagationScratch,
    THRESHOLD_EPS,
    compute_derivatives,
    compute_path_weights,
    compute_values,
    dc_propagate,
    incremental_fix,
    naive_propagate,
)
from .baseline import (
    Affine,
    BoundsResult,
    DecisionEquation,
    LinearSystem,
    bounds_propagate,
    decompose,
)
from .solver import (
    Constraint,
    Problem,
    SearchStats,
    cardinality_propagate,
    propagation_loop,
    solve_opt,
    solve_sat,
    strategy_value,
)
from .model_io import (
    Edge,
    ParsedModel,
    ProbNetwork,
    Query,
    build_problem,
    format_model,
    parse_network,
    st_path_dnf,
    with_order,
)

__version__ = "0.1.0"

__all__ = [
    "AND",
    "Affine",
    "BOTH",
    "BoundsResult",
    "CapacityError",
    "Constraint",
    "ConstraintTerm",
    "Cube",
    "DECISION",
    "DecisionEquation",
    "DomainState",
    "Edge",
    "FAILED",
    "FALSE_NODE",
    "FALSE_ONLY",
    "LinearSystem",
    "OK",
    "OR",
    "Obdd",
    "ParseError",
    "ParsedModel",
    "ProbNetwork",
    "Problem",
    "PropagationResult",
    "PropagationScratch",
    "Query",
    "STOCHASTIC",
    "ScopddError",
    "SearchStats",
    "StructureError",
    "THRESHOLD_EPS",
    "TRUE_NODE",
    "TRUE_ONLY",
    "VarInfo",
    "VariableTable",
    "bounds_propagate",
    "build_problem",
    "cardinality_propagate",
    "compute_derivatives",
    "compute_path_weights",
    "compute_values",
    "dc_propagate",
    "decompose",
    "dump_dot",
    "dump_obdd",
    "evaluate",
    "format_model",
    "from_dnf",
    "incremental_fix",
    "load_obdd",
    "model_probability",
    "naive_propagate",
    "parse_network",
    "propagation_loop",
    "solve_opt",
    "solve_sat",
    "st_path_dnf",
    "strategy_value",
    "validate",
    "with_order",
]
