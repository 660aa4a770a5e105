"""Displacement interpolation at both levels.

Inner geodesics move each unit of plan mass along a straight segment. Outer
geodesics apply that construction inside every plan of a random coupling, or
equivalently inside every pair of an optimal outer coupling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import NestedOTError
from .measures import DiscreteMeasure, RandomMeasure
from .nested import OuterCoupling, RandomCoupling, nested_wasserstein, optimal_random_coupling
from .ot_core import Coupling, wasserstein


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise NestedOTError("parameter out of range")
    return t


def _displace(x: np.ndarray, y: np.ndarray, mass: np.ndarray, t: float) -> DiscreteMeasure:
    # one atom per positive plan entry, row-major; no merging at interior times
    ii, jj = np.nonzero(mass > 0)
    atoms = (1.0 - t) * x[ii] + t * y[jj]
    return DiscreteMeasure(atoms, mass[ii, jj])


def inner_geodesic(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float, plan: Coupling, t: float) -> DiscreteMeasure:
    """Point at time t of the displacement interpolation induced by ``plan``."""
    t = _check_t(t)
    if not p > 1:
        raise NestedOTError("geodesics require p > 1")
    if mu.dim != nu.dim:
        raise NestedOTError("dimension mismatch")
    if not plan.is_feasible(mu, nu):
        raise NestedOTError("marginal mismatch")
    return _displace(mu.atoms, nu.atoms, plan.mass, t)


def outer_geodesic_from_random_coupling(P: RandomCoupling, t: float) -> RandomMeasure:
    t = _check_t(t)
    comps = [_displace(pl.source.atoms, pl.target.atoms, pl.coupling.mass, t) for pl in P.plans]
    return RandomMeasure(comps, [pl.weight for pl in P.plans])


def outer_geodesic_from_coupling(M: RandomMeasure, N: RandomMeasure, Pi: OuterCoupling, p: float, t: float) -> RandomMeasure:
    """Interpolate every outer pair along its own inner W_p geodesic."""
    t = _check_t(t)
    if not p > 1:
        raise NestedOTError("geodesics require p > 1")
    mass = np.asarray(Pi.mass)
    comps, weights = [], []
    for i, j in zip(*np.nonzero(mass > 0)):
        mu, nu = M.components[i], N.components[j]
        plan = wasserstein(mu, nu, p).coupling
        comps.append(inner_geodesic(mu, nu, p, plan, t))
        weights.append(mass[i, j])
    return RandomMeasure(comps, weights)


@dataclass(frozen=True, eq=False)
class GeodesicCurve:
    """A geodesic between two measures (inner) or two random measures (outer)."""

    level: Literal["inner", "outer"]
    start: DiscreteMeasure | RandomMeasure
    end: DiscreteMeasure | RandomMeasure
    plan: Coupling | RandomCoupling
    p: float = 2.0

    @classmethod
    def between(cls, a, b, p: float = 2.0) -> "GeodesicCurve":
        """Build the geodesic from an optimal (random) coupling of ``a`` and ``b``."""
        if isinstance(a, RandomMeasure):
            _, Pi = nested_wasserstein(a, b, p)
            return cls("outer", a, b, optimal_random_coupling(a, b, Pi, p), p)
        return cls("inner", a, b, wasserstein(a, b, p).coupling, p)

    def sample(self, t: float):
        if self.level == "inner":
            return inner_geodesic(self.start, self.end, self.p, self.plan, t)
        return outer_geodesic_from_random_coupling(self.plan, t)
