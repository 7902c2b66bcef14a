from .builder import QuadrupedOcpBuilder, snap_gait_to_lattice
from .constraints import constraint_dimension, friction_constraints, mode_constraints
from .costs import CostWeights, QuadrupedCost, TaskCommand
from .gait import (
    GAIT_FACTORIES,
    GaitSchedule,
    SwingProfile,
    dynamic_walk_gait,
    pace_gait,
    single_step_gait,
    stance_gait,
    trot_gait,
)
from .quadruped import (
    FORCES,
    INPUT_LABELS,
    JOINT_VEL,
    JOINTS,
    KinodynamicInput,
    KinodynamicState,
    LEG_NAMES,
    NU,
    NX,
    OMEGA,
    POSITION,
    RobotParams,
    STATE_LABELS,
    THETA,
    VELOCITY,
    default_stance_state,
    dynamics,
    dynamics_jacobians,
    force_slice,
    forward_kinematics,
    forward_kinematics_full,
    joint_slice,
    nominal_stance_input,
    rotation_body_to_world,
)
from .simple import double_integrator_ocp, lti_ocp

__all__ = [
    "CostWeights",
    "GAIT_FACTORIES",
    "GaitSchedule",
    "KinodynamicInput",
    "KinodynamicState",
    "QuadrupedCost",
    "QuadrupedOcpBuilder",
    "RobotParams",
    "SwingProfile",
    "TaskCommand",
    "constraint_dimension",
    "default_stance_state",
    "double_integrator_ocp",
    "dynamic_walk_gait",
    "dynamics",
    "dynamics_jacobians",
    "forward_kinematics",
    "friction_constraints",
    "lti_ocp",
    "mode_constraints",
    "nominal_stance_input",
    "pace_gait",
    "single_step_gait",
    "snap_gait_to_lattice",
    "stance_gait",
    "trot_gait",
]
