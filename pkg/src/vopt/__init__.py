"""Solvers for convex vector optimization problems under a polyhedral ordering cone."""
from .bounds import EnclosureState, enclosure_width, init_enclosure, insert_lower, insert_point, insert_upper, widest_pair
from .cone import OrderingCone, cone_from_halfspaces, cone_from_rays, cone_leq, dual_cone, natural_cone
from .engine import (
    Algorithm,
    SolveOptions,
    SolveResult,
    Status,
    check_stopping,
    initialize,
    run_adena,
    run_monmo,
    run_movs,
    run_parallel,
    solve,
)
from .model import Constraint, QuadraticFunction, VectorProblem, evaluate_objectives, load_problem, parse_problem
from .polytope import Halfspace, Polyhedron, distance_point_to_polyhedron, enumerate_vertices, hausdorff_nested
from .scalar_backend import BackendOptions, BarrierBackend, ScalarProblem, ScalarSolution, SolveStatus

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "BackendOptions",
    "BarrierBackend",
    "Constraint",
    "EnclosureState",
    "Halfspace",
    "OrderingCone",
    "Polyhedron",
    "QuadraticFunction",
    "ScalarProblem",
    "ScalarSolution",
    "SolveOptions",
    "SolveResult",
    "SolveStatus",
    "Status",
    "VectorProblem",
    "check_stopping",
    "cone_from_halfspaces",
    "cone_from_rays",
    "cone_leq",
    "distance_point_to_polyhedron",
    "dual_cone",
    "enclosure_width",
    "enumerate_vertices",
    "evaluate_objectives",
    "hausdorff_nested",
    "init_enclosure",
    "initialize",
    "insert_lower",
    "insert_point",
    "insert_upper",
    "load_problem",
    "natural_cone",
    "parse_problem",
    "run_adena",
    "run_monmo",
    "run_movs",
    "run_parallel",
    "solve",
    "widest_pair",
]
