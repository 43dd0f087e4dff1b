"""Ballistic random walks in i.i.d. random environments with a forbidden direction.

Simulation of quenched and annealed walks, regeneration blocks, exact quenched
propagation, estimators for the velocity and the diffusion coefficients, and
the renewal estimates behind the quenched central limit theorem.
"""

__version__ = "0.1.0"

from ._accel import backend  # noqa: E402
from .env import Environment, EnvironmentLaw, JumpDistribution, SiteLaw, WindowEvent, PRESETS  # noqa: E402

__all__ = ["Environment", "EnvironmentLaw", "JumpDistribution", "SiteLaw", "WindowEvent", "PRESETS", "backend",
           "__version__"]
