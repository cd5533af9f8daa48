# Package marker for dynamics
from .base import (
    AgentModel,
    DimensionError,
    IntegrationError,
    JointState,
    actuated_control_matrix,
    actuated_drift,
    actuated_slice,
    euler_maruyama_step,
    joint_control_matrix,
    joint_drift,
    joint_noise_matrix,
    shared_model,
    step_states,
)
from .integrator import make_integrator
from .unicycle import make_unicycle

__all__ = [
    "AgentModel",
    "DimensionError",
    "IntegrationError",
    "JointState",
    "actuated_control_matrix",
    "actuated_drift",
    "actuated_slice",
    "euler_maruyama_step",
    "joint_control_matrix",
    "joint_drift",
    "joint_noise_matrix",
    "make_integrator",
    "make_unicycle",
    "shared_model",
    "step_states",
]
