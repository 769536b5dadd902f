"""Minimal curvature flow with an obstacle: game and level-set solvers, discrete convexity tools."""

__version__ = "0.1.0"

from .curvature import eval_L, eval_L_batch, mean_curvature_op
from .errors import (
    ConfigError,
    CoverageError,
    DegenerateCenterError,
    EmptySetError,
    InvalidStartError,
    MincurvError,
    PreconditionError,
    StabilityError,
)
from .game import GameParams, alt_dpp_step, direction_set, dpp_step, run_game
from .grid import BoolMask, GridField, GridSpec, hausdorff_distance, interpolate, positivity_set
from .hull import Polytope, convex_hull
from .obstacle import EnlargedObstacle, ObstacleSpec, h_eps, psi_eps, psi_eps_field
from .pde import PdeParams, pde_step, run_pde

__all__ = [
    "BoolMask", "ConfigError", "CoverageError", "DegenerateCenterError", "EmptySetError",
    "EnlargedObstacle", "GameParams", "GridField", "GridSpec", "InvalidStartError", "MincurvError",
    "ObstacleSpec", "PdeParams", "Polytope", "PreconditionError", "StabilityError", "alt_dpp_step",
    "convex_hull", "direction_set", "dpp_step", "eval_L", "eval_L_batch", "h_eps", "hausdorff_distance",
    "interpolate", "mean_curvature_op", "pde_step", "positivity_set", "psi_eps", "psi_eps_field",
    "run_game", "run_pde",
]
