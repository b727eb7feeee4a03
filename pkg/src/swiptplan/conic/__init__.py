"""Second-order cone program IR and the interior-point solver behind it."""

from .program import Cone, ConeBlock, ConicProgram, ConicSolution, complex_embed
from .solver import SolverOptions, solve

__all__ = [
    "Cone",
    "ConeBlock",
    "ConicProgram",
    "ConicSolution",
    "SolverOptions",
    "complex_embed",
    "solve",
]
