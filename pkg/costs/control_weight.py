"""
Control weights tied to the noise by R = lambda (sigma sigma^T)^-1, the condition
under which the optimality equation becomes linear in the desirability.
"""

import logging
from typing import Optional

import numpy as np
from scipy.linalg import block_diag

from .running import CostError

logger = logging.getLogger(__name__)

CONSISTENCY_TOLERANCE = 1e-6


def derive_control_weight(
    sigma: np.ndarray,
    lam: float,
    supplied: Optional[np.ndarray] = None,
    strict: bool = False,
) -> np.ndarray:
    """
    Return R = lam * (sigma sigma^T)^-1.

    When `supplied` is given, its relative Frobenius distance to the derived
    matrix is checked; above 1e-6 this logs a warning, or raises in strict mode.
    """
    if not lam > 0:
        raise CostError(f"lambda must be positive, got {lam}")
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    cov = sigma @ sigma.T
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise CostError("sigma sigma^T is singular; the control weight cannot be derived")
    r = lam * np.linalg.inv(cov)
    r = 0.5 * (r + r.T)
    if supplied is not None:
        supplied = np.atleast_2d(np.asarray(supplied, dtype=float))
        if supplied.shape != r.shape:
            raise CostError(f"supplied R has shape {supplied.shape}, expected {r.shape}")
        mismatch = np.linalg.norm(supplied - r) / np.linalg.norm(r)
        if mismatch > CONSISTENCY_TOLERANCE:
            message = (f"supplied control weight deviates from lambda (sigma sigma^T)^-1 "
                       f"by {mismatch:.3e} (relative); path-integral weights follow the sampling noise")
            if strict:
                raise CostError(message)
            logger.warning(message)
    return r


def joint_control_weight(r_agent: np.ndarray, n_members: int) -> np.ndarray:
    """R̄ for a subsystem: one agent block per member."""
    return block_diag(*[np.atleast_2d(r_agent)] * n_members)
