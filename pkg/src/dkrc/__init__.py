"""Data-driven Koopman lifting and linear control for unknown nonlinear systems.

The pipeline: collect transition data from a simulator under exploration
noise, learn a neural lifting into a space where the dynamics are
approximately linear, identify the lifted system matrices in closed form,
then synthesize LQR or box-constrained MPC controllers and analyze the
learned operator's eigenfunctions.
"""

from . import analysis, control, data, envs, koopman, linalg, net
from .backend import name as backend_name

__all__ = [
    "analysis",
    "backend_name",
    "control",
    "data",
    "envs",
    "koopman",
    "linalg",
    "net",
]

__version__ = "0.1.0"
