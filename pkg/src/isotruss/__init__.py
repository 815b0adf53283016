"""Fault-tolerant kinematic control and analysis for isoperimetric truss robots.

The package models constant-perimeter triangular trusses actuated by tube
rollers, drives a target vertex through constrained per-step optimization
under arbitrary roller failures, guards structural rigidity with a
discrete-time barrier on the critical singular value of the rigidity matrix,
and ships the workspace, manipulability, and open/closed-loop tracking
analyses against a simulated plant.
"""

from .analysis import (
    DegradationReport,
    GreedyReport,
    ManipReport,
    Trace,
    WorkspaceComparison,
    WorkspacePolygon,
    dtcbf_workspace_comparison,
    greedy_failure_order,
    manipulability,
    polar_area,
    rmse,
    workspace,
    workspace_degradation,
)
from .barrier import (
    BarrierEval,
    BarrierParams,
    DecaySlack,
    dtcbf_residual,
    predict_configuration,
    rigidity_spectrum,
    sigma_crit,
)
from .barrier import barrier as barrier_eval
from .controller import (
    Controller,
    ControlSpec,
    SolveResult,
    build_b_move,
    objective,
    solve_step,
    solve_step_with_backoff,
)
from .errors import (
    DegenerateEdge,
    EmptyTrace,
    InfeasibleEdgeRates,
    InitializationUnsafe,
    NonmonotonicTime,
    SchemaError,
    SingularAugmentedMatrix,
    TopologyError,
    TrussError,
    UnknownRoller,
    UnknownVertex,
)
from .estimator import (
    EncoderFrame,
    EstimatorState,
    FailureDetector,
    SlidingFilter,
    estimate_ddot,
    forward_jacobian,
    integrate,
    integrate_positions,
)
from .plant import Plant, PlantConfig, PlantState
from .scenario import (
    RunAborted,
    RunLog,
    Scenario,
    StepRecord,
    load_runlog,
    load_scenario,
    parse_scenario,
    run_scenario,
)
from .truss import (
    Configuration,
    ConstraintSet,
    EdgeLengths,
    Roller,
    TrussTopology,
    actuation_matrix,
    constraint_rows,
    edge_lengths,
    inverse_kinematics,
    rigidity_matrix,
    triforce,
)

__version__ = "0.1.0"
