"""Depth-width separation for ReLU networks through the periods of interval maps.

The library computes oscillation growth rates of maps with odd periods,
exact piecewise-linear iterates and their L1 distances, the resulting
lower bounds for under-sized networks, and runs the matching training
experiments.
"""

from .covering import build_empirical_graph, build_theoretical_graph, oscillation_lower_bound, spectral_radius
from .dynamics import detect_periods, prime_period_up_to, sharkovsky_compare
from .pl import PLFunction, compose, count_crossings, l1_distance, lipschitz, self_compose
from .rates import rho, rho_legacy
from .separation import SeparationConfig, hard_family, slope_map, tent_map, theory_bound

__all__ = [
    "PLFunction", "compose", "self_compose", "count_crossings", "l1_distance", "lipschitz",
    "detect_periods", "prime_period_up_to", "sharkovsky_compare",
    "build_theoretical_graph", "build_empirical_graph", "spectral_radius", "oscillation_lower_bound",
    "rho", "rho_legacy",
    "SeparationConfig", "hard_family", "slope_map", "tent_map", "theory_bound",
]
