from .linear import IdentificationError, LinearModel, oriiden_identify
from .objective import (
    ObjectiveError,
    append_objective,
    build_objective_layer,
    hinge_square_term,
    linear_term,
    square_term,
)
from .problem import (
    Costs,
    IterationLog,
    OptProblem,
    OptResult,
    Simulator,
    SolverConfig,
    action_violation,
    actual_rollout,
    comfort_bounds,
    cost,
    penalty_objective,
    project_actions,
    zone_temperature_penalty,
)
from .solvers import (
    METHODS,
    LatentPlanGraph,
    SolverError,
    adaptive_descent,
    groundtruth_solve,
    linear_objective_and_grad,
    optiden_solve,
    optsim_solve,
    oriiden_solve,
    orisim_solve,
    solve,
    zeroth_order_direction,
)
