"""1-D single integrator dx = u dt + sigma dw, the linear-quadratic test system."""

import numpy as np

from .base import AgentModel


def _zero_drift(x: np.ndarray, t: float) -> np.ndarray:
    return np.zeros_like(x)


def _unit_control_matrix(x: np.ndarray) -> np.ndarray:
    return np.ones(x.shape[:-1] + (1, 1))


def make_integrator(sigma: float, sampling_sigma: float = None) -> AgentModel:
    if sampling_sigma is None:
        sampling_sigma = sigma
    return AgentModel(
        name="integrator",
        state_dim=1,
        input_dim=1,
        nonact_dim=0,
        drift=_zero_drift,
        control_matrix=_unit_control_matrix,
        noise_scale=np.array([[sigma]]),
        sampling_noise_scale=np.array([[sampling_sigma]]),
        constant_control_matrix=True,
        params={"sigma": sigma, "sampling_sigma": sampling_sigma},
    )
