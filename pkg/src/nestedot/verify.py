"""Numerical verifiers for continuity equations, superposition, Benamou-Brenier and Gronwall.

Time derivatives are always central differences at interior nodes, so every
residual here is second order in the grid step for smooth fields.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .cylinder import CylinderFunction, TestFunction, eval_cylinder, field_pairing
from .dynamics import ParticlePath, TimeGrid, TrajectoryEnsemble, evolve_ensemble, integrate_weighted
from .errors import GronwallViolation, NestedOTError
from .fields import NonLocalField
from .geodesics import outer_geodesic_from_random_coupling
from .measures import DiscreteMeasure, RandomMeasure
from .nested import nested_wasserstein, optimal_random_coupling
from .ot_core import wasserstein

MIN_STEPS = 4


@dataclass(frozen=True, eq=False)
class ResidualReport:
    times: np.ndarray
    per_node: np.ndarray
    order: float | None = None

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.per_node), initial=0.0))

    def to_dict(self) -> dict:
        return {
            "max_abs": self.max_abs,
            "order": self.order,
            "per_node": [float(r) for r in self.per_node],
            "times": [float(t) for t in self.times],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "residual"])
        for t, r in zip(self.times, self.per_node):
            w.writerow([repr(float(t)), repr(float(r))])
        return buf.getvalue()


def observed_order(coarse: ResidualReport, fine: ResidualReport) -> float:
    """log2 of the max-residual ratio on the time nodes both grids share."""
    shared = np.isin(np.round(fine.times, 12), np.round(coarse.times, 12))
    rc = np.max(np.abs(coarse.per_node))
    rf = np.max(np.abs(fine.per_node[shared]))
    if rf == 0.0:
        return math.inf if rc > 0 else math.nan
    return math.log2(rc / rf)


def _require_resolution(grid: TimeGrid) -> None:
    if grid.steps < MIN_STEPS:
        raise NestedOTError("insufficient resolution")


def _cerm_per_node(ens: TrajectoryEnsemble, b: NonLocalField, F: CylinderFunction) -> ResidualReport:
    grid = ens.grid
    _require_resolution(grid)
    nodes, h = grid.nodes, grid.h
    values = np.zeros(grid.steps + 1)
    for w, pth in zip(ens.path_weights, ens.paths):
        values += w * np.array([eval_cylinder(F, pth.measure(k)) for k in range(grid.steps + 1)])
    lhs = (values[2:] - values[:-2]) / (2 * h)
    rhs = np.zeros(grid.steps - 1)
    for k in range(1, grid.steps):
        rhs[k - 1] = sum(
            w * field_pairing(F, b, pth.measure(k), nodes[k]) for w, pth in zip(ens.path_weights, ens.paths)
        )
    return ResidualReport(nodes[1:-1], lhs - rhs)


def cerm_residual(
    ens: TrajectoryEnsemble, b: NonLocalField, F: CylinderFunction, estimate_order: bool = True
) -> ResidualReport:
    """Residual of d/dt int F dM_t = int int b . grad_W F dmu dM_t at interior nodes.

    With ``estimate_order`` the ensemble is re-integrated from its initial
    configurations on the grid with half the step and the observed order is
    attached to the report.
    """
    rep = _cerm_per_node(ens, b, F)
    if not estimate_order:
        return rep
    fine = evolve_ensemble(ens.initial(), b, ens.grid.refined(2), ens.scheme, ens.seed)
    return ResidualReport(rep.times, rep.per_node, observed_order(rep, _cerm_per_node(fine, b, F)))


def ce_inner_residual(path: ParticlePath, b: NonLocalField, phi: TestFunction) -> ResidualReport:
    """Residual of d/dt int phi dmu_t = int grad phi . b(t, ., mu_t) dmu_t along one path."""
    grid = path.grid
    _require_resolution(grid)
    nodes, h = grid.nodes, grid.h
    w = path.particle_weights()
    vals = np.array([w @ phi.value(x) for x in path.states])
    lhs = (vals[2:] - vals[:-2]) / (2 * h)
    rhs = np.array(
        [
            w @ np.sum(phi.grad(path.states[k]) * b.velocity(nodes[k], path.states[k], path.states[k], w), axis=1)
            for k in range(1, grid.steps)
        ]
    )
    return ResidualReport(nodes[1:-1], lhs - rhs)


def sps_residual(path: ParticlePath, b: NonLocalField) -> float:
    """Largest gap between central-difference particle velocities and the field."""
    grid = path.grid
    if grid.steps < 2:
        raise NestedOTError("interior nodes required")
    nodes, h = grid.nodes, grid.h
    w = path.particle_weights()
    worst = 0.0
    for k in range(1, grid.steps):
        x = path.states[k]
        v = (path.states[k + 1] - path.states[k - 1]) / (2 * h)
        worst = max(worst, float(np.max(np.linalg.norm(v - b.velocity(nodes[k], x, x, w), axis=1))))
    return worst


@dataclass(frozen=True)
class BBReport:
    action: float
    distance_p: float
    gap: float

    def to_dict(self) -> dict:
        return {"action": self.action, "distance_p": self.distance_p, "gap": self.gap}


def benamou_brenier_check(M0: RandomMeasure, M1: RandomMeasure, p: float = 2.0, time_steps: int = 16) -> BBReport:
    """Kinetic action of straight-line transport along an optimal random coupling.

    The outer geodesic is sampled at ``time_steps + 1`` times; atoms keep their
    identity across samples, so velocities are exact difference quotients and
    the action is their time-integrated p-th power against the lifted measure.
    ``distance_p`` is WW_p^p from the nested solver.
    """
    if not p > 1:
        raise NestedOTError("Benamou-Brenier check requires p > 1")
    cost, Pi = nested_wasserstein(M0, M1, p)
    P = optimal_random_coupling(M0, M1, Pi, p)
    ts = np.linspace(0.0, 1.0, time_steps + 1)
    samples = [outer_geodesic_from_random_coupling(P, t) for t in ts]
    action = 0.0
    for k in range(time_steps):
        dt = ts[k + 1] - ts[k]
        for w, a, c in zip(samples[k].outer_weights, samples[k].components, samples[k + 1].components):
            v = (c.atoms - a.atoms) / dt
            action += dt * w * float(a.weights @ np.linalg.norm(v, axis=1) ** p)
    return BBReport(action, cost, action - cost)


@dataclass(frozen=True, eq=False)
class GronwallReport:
    times: np.ndarray
    distances: np.ndarray
    bounds: np.ndarray
    lipschitz: float
    ok: bool
    violations: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "lipschitz": self.lipschitz,
            "times": self.times.tolist(),
            "distances": self.distances.tolist(),
            "bounds": self.bounds.tolist(),
            "violations": self.violations,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "distance", "bound"])
        for row in zip(self.times, self.distances, self.bounds):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def gronwall_uniqueness_check(
    b: NonLocalField,
    mu_a: DiscreteMeasure,
    mu_b: DiscreteMeasure,
    grid: TimeGrid,
    p: float = 2.0,
    scheme: str = "rk4",
    strict: bool = True,
) -> GronwallReport:
    """Check W_p(mu_t^a, mu_t^b) <= exp(L t) W_p(mu_0^a, mu_0^b) (1 + 10 h) on the grid.

    Both initial measures are transported along their own characteristics;
    a fresh optimal plan is solved at every node. ``L`` is the largest
    Lipschitz bound the field reports over the grid.
    """
    if mu_a.dim != mu_b.dim:
        raise NestedOTError("dimension mismatch")
    xa = integrate_weighted(mu_a.atoms, mu_a.weights, b, grid, scheme)
    xb = integrate_weighted(mu_b.atoms, mu_b.weights, b, grid, scheme)
    nodes = grid.nodes
    dist = np.array(
        [wasserstein(DiscreteMeasure(xa[k], mu_a.weights), DiscreteMeasure(xb[k], mu_b.weights), p).distance
         for k in range(grid.steps + 1)]
    )
    L = max(b.lipschitz_bound(t) for t in nodes)
    bounds = np.exp(L * (nodes - grid.t0)) * dist[0] * (1 + 10 * grid.h) + 1e-9
    bad = [int(k) for k in np.flatnonzero(dist > bounds)]
    rep = GronwallReport(nodes, dist, bounds, float(L), not bad, bad)
    if bad and strict:
        k = bad[0]
        raise GronwallViolation(f"Gronwall violation at node {k} (t={nodes[k]!r}): {dist[k]!r} > {bounds[k]!r}")
    return rep
