"""Interior-penalty dG solver for the Cahn-Hilliard-Navier-Stokes system
with a fully decoupled pressure-projection time splitting."""

from .forms import PenaltyConfig
from .mesh import build_structured_mesh, face_orientation_check
from .simulation import Forcing, SchemeParams, SimState, Simulation

__all__ = [
    "PenaltyConfig",
    "build_structured_mesh",
    "face_orientation_check",
    "Forcing",
    "SchemeParams",
    "SimState",
    "Simulation",
]
