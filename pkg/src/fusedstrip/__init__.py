"""Fused stochastic vertex model on a strip: weights, Markov dynamics,
matrix product ansatz and Askey-Wilson formulas for the stationary measure."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .vertex_weights import ModelParams, model_weights  # noqa: F401
from .strip_model import DownRightPath, step_transition_matrix, stationary_exact  # noqa: F401
