"""Wasserstein distance between random measures, with ground metric W_p.

The outer problem is an ordinary transport problem whose cost matrix holds
W_p^p between components. A random coupling attaches one optimal inner plan
to every outer pair that carries mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._parallel import pmap
from .errors import NestedOTError
from .measures import DiscreteMeasure, RandomMeasure, canonical_random
from .ot_core import Coupling, cost_matrix, solve_transport, wasserstein

MARGINAL_ATOL = 1e-9


@dataclass(frozen=True, eq=False)
class OuterCoupling:
    mass: np.ndarray
    inner_costs: np.ndarray

    def to_dict(self) -> dict:
        return {"mass": np.asarray(self.mass).tolist(), "inner_costs": np.asarray(self.inner_costs).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "OuterCoupling":
        return cls(np.asarray(d["mass"], dtype=float), np.asarray(d["inner_costs"], dtype=float))


@dataclass(frozen=True, eq=False)
class InnerPlan:
    i: int
    j: int
    weight: float
    source: DiscreteMeasure
    target: DiscreteMeasure
    coupling: Coupling

    def to_dict(self) -> dict:
        return {
            "i": self.i,
            "j": self.j,
            "w": self.weight,
            "coupling": self.coupling.to_dict(),
            "source": self.source.to_dict(),
            "target": self.target.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InnerPlan":
        return cls(
            int(d["i"]),
            int(d["j"]),
            float(d["w"]),
            DiscreteMeasure.from_dict(d["source"]),
            DiscreteMeasure.from_dict(d["target"]),
            Coupling.from_dict(d["coupling"]),
        )


@dataclass(frozen=True, eq=False)
class RandomCoupling:
    """Finite law over inner transport plans."""

    plans: tuple[InnerPlan, ...]

    @property
    def outer_weights(self) -> np.ndarray:
        return np.array([pl.weight for pl in self.plans])

    def to_dict(self) -> dict:
        return {"plans": [pl.to_dict() for pl in self.plans]}

    @classmethod
    def from_dict(cls, d: dict) -> "RandomCoupling":
        return cls(tuple(InnerPlan.from_dict(x) for x in d["plans"]))


def inner_cost_matrix(M: RandomMeasure, N: RandomMeasure, p: float) -> np.ndarray:
    """W_p^p between every pair of components; each entry is an independent solve."""
    pairs = [(i, j) for i in range(M.size) for j in range(N.size)]
    costs = pmap(lambda ij: wasserstein(M.components[ij[0]], N.components[ij[1]], p).cost, pairs)
    out = np.empty((M.size, N.size))
    for (i, j), c in zip(pairs, costs):
        out[i, j] = c
    return out


def nested_wasserstein(M: RandomMeasure, N: RandomMeasure, p: float = 2.0) -> tuple[float, OuterCoupling]:
    """Return (WW_p^p(M, N), optimal outer coupling)."""
    if M.dim != N.dim:
        raise NestedOTError("dimension mismatch")
    if not p >= 1:
        raise NestedOTError("invalid exponent")
    K = inner_cost_matrix(M, N, p)
    plan, _ = solve_transport(M.outer_weights, N.outer_weights, K)
    cost = max(float(np.sum(plan * K)), 0.0)
    return cost, OuterCoupling(plan, K)


def nested_distance(M: RandomMeasure, N: RandomMeasure, p: float = 2.0) -> float:
    return nested_wasserstein(M, N, p)[0] ** (1.0 / p)


def optimal_random_coupling(M: RandomMeasure, N: RandomMeasure, Pi: OuterCoupling, p: float = 2.0) -> RandomCoupling:
    """Attach an optimal inner plan to every outer pair with positive mass."""
    mass = np.asarray(Pi.mass, dtype=float)
    if mass.shape != (M.size, N.size):
        raise NestedOTError("marginal mismatch")
    if not (
        np.allclose(mass.sum(axis=1), M.outer_weights, rtol=0, atol=MARGINAL_ATOL)
        and np.allclose(mass.sum(axis=0), N.outer_weights, rtol=0, atol=MARGINAL_ATOL)
        and np.all(mass >= 0)
    ):
        raise NestedOTError("marginal mismatch")
    plans = []
    for i, j in zip(*np.nonzero(mass > 0)):
        mu, nu = M.components[i], N.components[j]
        res = wasserstein(mu, nu, p)
        plans.append(InnerPlan(int(i), int(j), float(mass[i, j]), mu, nu, res.coupling))
    return RandomCoupling(tuple(plans))


def random_coupling_cost(P: RandomCoupling, p: float = 2.0) -> float:
    """Double integral of |x - y|^p against each plan and then against the law of plans."""
    total = 0.0
    for pl in P.plans:
        C = cost_matrix(pl.source.atoms, pl.target.atoms, p)
        total += pl.weight * float(np.sum(pl.coupling.mass * C))
    return total


def random_coupling_marginals(P: RandomCoupling) -> tuple[RandomMeasure, RandomMeasure]:
    """Push every inner plan to its two marginals and aggregate equal measures."""
    firsts, seconds, w = [], [], []
    for pl in P.plans:
        firsts.append(DiscreteMeasure(pl.source.atoms, pl.coupling.mass.sum(axis=1)))
        seconds.append(DiscreteMeasure(pl.target.atoms, pl.coupling.mass.sum(axis=0)))
        w.append(pl.weight)
    # row sums of a simplex plan reproduce the weights only up to rounding
    return (
        canonical_random(RandomMeasure(firsts, w), weight_atol=1e-12),
        canonical_random(RandomMeasure(seconds, w), weight_atol=1e-12),
    )
