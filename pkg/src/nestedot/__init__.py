"""Optimal transport between random measures: distances, couplings, geodesics and dynamics."""

__version__ = "0.1.0"

from .errors import NestedOTError
from .measures import (
    DiscreteMeasure,
    ParticleConfiguration,
    RandomMeasure,
    barycenter,
    empirical_map,
    p_moment,
    pushforward,
)
from .nested import nested_distance, nested_wasserstein, optimal_random_coupling, random_coupling_marginals
from .ot_core import brute_force_wasserstein, kantorovich_gap, wasserstein

__all__ = [
    "DiscreteMeasure",
    "NestedOTError",
    "ParticleConfiguration",
    "RandomMeasure",
    "barycenter",
    "brute_force_wasserstein",
    "empirical_map",
    "kantorovich_gap",
    "nested_distance",
    "nested_wasserstein",
    "optimal_random_coupling",
    "p_moment",
    "pushforward",
    "random_coupling_marginals",
    "wasserstein",
]
