"""Constrained SLQ trajectory optimization with relaxed-barrier inequality
handling, frequency-shaped input costs, a kinodynamic quadruped model, and a
closed-loop feedback-MPC simulation harness."""

from .barrier import (
    BarrierConfig,
    ConeSpec,
    augment_cost,
    perturbed_cone,
    project_to_local_frame,
    relaxed_barrier,
    surface_frame,
)
from .errors import ConstraintRankError, ScenarioError, SimulationDiverged
from .freq_shaping import (
    AugmentedPolicy,
    FilterConfig,
    FilterRealization,
    augment_initial_state,
    augment_ocp,
    controller_frequency_response,
    realize_filters,
    reconstruct_policy,
)
from .ocp import (
    AffinePolicy,
    CostQuadratic,
    DerivativeReport,
    LqNode,
    LqProblem,
    ModeSchedule,
    OcpDefinition,
    TimeGrid,
    Trajectory,
    build_lq_problem,
    check_derivatives,
    interpolate_policy,
)
from .slq import (
    IterationRecord,
    RolloutResult,
    SlqSettings,
    SlqSolution,
    ValueFunctionQuad,
    real_time_iteration,
    riccati_backward_pass,
    rollout,
    shift_policy,
    solve,
)

__version__ = "0.1.0"
