"""
Planar UAV / unicycle model with state (x, y, v, phi) and inputs (u, omega):

    dx = v cos(phi) dt,  dy = v sin(phi) dt,
    dv = u dt + sigma dw_1,  dphi = omega dt + nu dw_2.

Position is not directly actuated (U = 2); speed and heading are (D = 2).
Heading is an unconstrained real, it is never wrapped.
"""

import numpy as np

from .base import AgentModel

_CONTROL_MATRIX = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def unicycle_drift(x: np.ndarray, t: float) -> np.ndarray:
    f = np.zeros_like(x)
    v = x[..., 2]
    phi = x[..., 3]
    f[..., 0] = v * np.cos(phi)
    f[..., 1] = v * np.sin(phi)
    return f


def unicycle_control_matrix(x: np.ndarray) -> np.ndarray:
    return np.broadcast_to(_CONTROL_MATRIX, x.shape[:-1] + _CONTROL_MATRIX.shape)


def make_unicycle(sigma: float, nu: float, sampling_sigma: float, sampling_nu: float) -> AgentModel:
    return AgentModel(
        name="unicycle",
        state_dim=4,
        input_dim=2,
        nonact_dim=2,
        drift=unicycle_drift,
        control_matrix=unicycle_control_matrix,
        noise_scale=np.diag([sigma, nu]),
        sampling_noise_scale=np.diag([sampling_sigma, sampling_nu]),
        constant_control_matrix=True,
        params={"sigma": sigma, "nu": nu, "sampling_sigma": sampling_sigma, "sampling_nu": sampling_nu},
    )
