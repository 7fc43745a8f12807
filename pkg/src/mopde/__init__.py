"""Numerical toolkit for parabolic equations with Musielak-Orlicz growth.

Modules: ``nfunction`` (Young and N-functions, conjugates, checkers),
``morlicz`` (grids, fields, modulars, Luxemburg norms), ``operators``
(monotone fluxes and their assumption checks), ``solver`` (implicit Euler
with the theta-regularization cascade), ``verify`` (energy, cutoff and
mollification diagnostics) and ``cli``.
"""
from .kernels import BACKEND
from .morlicz import DiscreteField, SpaceTimeGrid
from .nfunction import NFunction, YoungFunction
from .operators import MonotoneOperator, RegularizedOperator
from .solver import ProblemSpec, Solution, SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DiscreteField", "SpaceTimeGrid", "NFunction", "YoungFunction", "MonotoneOperator",
    "RegularizedOperator", "ProblemSpec", "Solution", "SolverConfig", "solve", "__version__",
]
