"""Optimal strategy revision in population games via finite-state mean field games."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    FORBIDDEN,
    EpsilonModifiedGame,
    GameSpec,
    LinearGame,
    MigrationGraph,
    PopulationState,
    TimeGrid,
    Trajectory,
    WeightScheme,
    congestion_game,
    eval_trajectory,
    evaluate_payoff,
    renormalize,
    rps_game,
    weight,
)
from .errors import (  # noqa: E402
    DomainError,
    InvalidInputError,
    NoConvergenceError,
    NumericalFailureError,
    OutOfRangeError,
    PopMFGError,
    StepSizeError,
)
from .protocols import (  # noqa: E402
    ClosedForm,
    OptimalPairwise,
    SmithStatic,
    closed_form_field,
    ed_vector_field,
    integrate_forward,
    protocol_rate,
    rate_matrix,
)
from .hj import ValueTrajectory, hj_rhs, integrate_backward  # noqa: E402
from .solver import SolveResult, SolverConfig, fixed_point_error, solve  # noqa: E402
from .agents import AgentPopulation, simulate, step, sup_distance  # noqa: E402
from .analysis import (  # noqa: E402
    contractiveness_probe,
    horizon_sweep,
    is_nash,
    nash_equilibrium,
    payoff_functional_estimate,
    positive_correlation_audit,
    stationary_diagnostics,
)
