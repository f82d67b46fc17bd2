"""2D Lagrangian incompressible flow on Voronoi particles.

Particle trajectories double as exact flow maps; velocity is transported
as a covector through the backward-map Jacobian, incompressibility comes
from a Voronoi-discretized pressure solve, and free surfaces fuse the
long-range map with one-step advection so standard boundary conditions
apply.
"""

from .backend import USE_NUMBA
from .config import SceneConfig, parse_config
from .geometry import VoronoiDiagram, build_diagram
from .operators import build_fluid_operators, build_operators
from .poisson import PoissonSolution, build_problem, cg_solve
from .stepper import SchemeMode, SimState, init_state, step

__version__ = "0.1.0"

__all__ = [
    "USE_NUMBA", "SceneConfig", "parse_config", "VoronoiDiagram",
    "build_diagram", "build_operators", "build_fluid_operators",
    "PoissonSolution", "build_problem", "cg_solve", "SchemeMode",
    "SimState", "init_state", "step", "__version__",
]
