"""Singular linear-quadratic optimal control through the constrained generalised
continuous algebraic Riccati equation and its differential counterpart."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DimensionMismatch,
    GcareError,
    IntegrationDiverged,
    InvalidMatrix,
    NoConvergence,
    NoStabilizingSolution,
    NotPSD,
    NotRegular,
    NotSymmetric,
    ProblemFileError,
    TerminalPenaltyNotReduced,
)
from .geometry import (  # noqa: E402
    GeometryReport,
    Quadruple,
    geometry_report,
    largest_output_nulling,
    largest_reachability,
    reachable_subspace,
    smallest_input_containing,
)
from .lqcontrol import (  # noqa: E402
    ControlLaw,
    FiniteHorizonProblem,
    Finiteness,
    LQSolution,
    SimulationSettings,
    Trajectory,
    control_family,
    evaluate_cost,
    finiteness_probe,
    simulate_closed_loop,
    solve_finite,
    solve_infinite,
)
from .matlin import RankTolerance, Subspace, kernel_projector, pseudo_inverse  # noqa: E402
from .problem import DerivedData, ProblemData, ValidationReport, derive, validate  # noqa: E402
from .problem_file import dump_problem, load_problem, parse_problem  # noqa: E402
from .riccati import (  # noqa: E402
    GRDETrajectory,
    IntegrationSettings,
    LimitSettings,
    Ordering,
    SolutionCandidate,
    care_limit_solution,
    check_cgcare,
    compare_psd,
    gcare_residual,
    grde_backward,
    grde_forward,
    reduce_terminal_penalty,
    reduced_residual,
    regular_care_oracle,
)
