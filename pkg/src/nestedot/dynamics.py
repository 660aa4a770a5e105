"""Interacting particle systems driven by a non-local field, and ensembles of them.

Each particle moves with velocity b(t, x_i, mu) where mu is the weighted
empirical measure of the current state. RK4 recomputes mu at every stage.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from ._parallel import pmap
from .errors import IntegrationBlowUp, NestedOTError
from .fields import NonLocalField
from .measures import DiscreteMeasure, ParticleConfiguration, RandomMeasure, empirical_map

Scheme = Literal["euler", "rk4"]


@dataclass(frozen=True)
class TimeGrid:
    t0: float = 0.0
    t1: float = 1.0
    steps: int = 100

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise NestedOTError("time grid needs t0 < t1")
        if int(self.steps) < 1:
            raise NestedOTError("time grid needs at least one step")

    @property
    def h(self) -> float:
        return (self.t1 - self.t0) / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return self.t0 + self.h * np.arange(self.steps + 1)

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t0, self.t1, self.steps * factor)

    def to_dict(self) -> dict:
        return {"t0": self.t0, "t1": self.t1, "steps": self.steps}


@dataclass(frozen=True, eq=False)
class ParticlePath:
    """States of N particles at every grid node; ``states`` has shape (nodes, N, d)."""

    grid: TimeGrid
    states: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        s = np.array(self.states, dtype=float)
        if s.ndim != 3 or s.shape[0] != self.grid.steps + 1:
            raise NestedOTError("path states must have shape (steps + 1, N, d)")
        s.setflags(write=False)
        object.__setattr__(self, "states", s)
        if self.weights is not None:
            w = np.array(self.weights, dtype=float)
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    def particle_weights(self) -> np.ndarray:
        return np.full(self.n, 1.0 / self.n) if self.weights is None else self.weights

    def configuration(self, k: int) -> ParticleConfiguration:
        return ParticleConfiguration(self.states[k])

    def measure(self, k: int) -> DiscreteMeasure:
        if self.weights is None:
            return empirical_map(self.configuration(k))
        return DiscreteMeasure(self.states[k], self.weights)


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    seed: int
    paths: tuple[ParticlePath, ...]
    path_weights: np.ndarray
    scheme: str = "rk4"

    def __post_init__(self):
        paths = tuple(self.paths)
        if not paths:
            raise NestedOTError("an ensemble needs at least one path")
        if len({(pth.grid, pth.dim) for pth in paths}) != 1:
            raise NestedOTError("ensemble paths must share grid and dimension")
        w = np.array(self.path_weights, dtype=float)
        if w.shape != (len(paths),) or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
            raise NestedOTError("path weights must be nonnegative and sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "paths", paths)
        object.__setattr__(self, "path_weights", w)

    @property
    def grid(self) -> TimeGrid:
        return self.paths[0].grid

    @property
    def dim(self) -> int:
        return self.paths[0].dim

    def initial(self) -> list[tuple[float, ParticleConfiguration]]:
        return [(float(w), pth.configuration(0)) for w, pth in zip(self.path_weights, self.paths)]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "scheme": self.scheme,
            "dim": self.dim,
            "grid": self.grid.to_dict(),
            "path_weights": self.path_weights.tolist(),
            "paths": [pth.states.tolist() for pth in self.paths],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryEnsemble":
        try:
            grid = TimeGrid(float(d["grid"]["t0"]), float(d["grid"]["t1"]), int(d["grid"]["steps"]))
            paths = tuple(ParticlePath(grid, np.asarray(s, dtype=float)) for s in d["paths"])
            return cls(int(d["seed"]), paths, np.asarray(d["path_weights"], dtype=float), d.get("scheme", "rk4"))
        except KeyError as exc:
            raise NestedOTError(f"missing key {exc.args[0]!r} in ensemble") from None

    def to_csv(self) -> str:
        """One row per (path, node, particle)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path", "node", "t", "particle"] + [f"x{k}" for k in range(self.dim)])
        nodes = self.grid.nodes
        for ip, pth in enumerate(self.paths):
            for k, state in enumerate(pth.states):
                for i, x in enumerate(state):
                    w.writerow([ip, k, repr(float(nodes[k])), i] + [repr(float(c)) for c in x])
        return buf.getvalue()


def _step(b: NonLocalField, t: float, h: float, x: np.ndarray, w: np.ndarray, scheme: str) -> np.ndarray:
    def vel(tt, xx):
        # an RK4 stage can leave the finite range before the step completes
        if not np.all(np.isfinite(xx)):
            raise IntegrationBlowUp(f"integration blow-up at t={tt!r}")
        return b.velocity(tt, xx, xx, w)

    if scheme == "euler":
        return x + h * vel(t, x)
    if scheme == "rk4":
        k1 = vel(t, x)
        k2 = vel(t + h / 2, x + h / 2 * k1)
        k3 = vel(t + h / 2, x + h / 2 * k2)
        k4 = vel(t + h, x + h * k3)
        return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    raise NestedOTError(f"unknown scheme {scheme!r}")


def integrate_weighted(
    atoms: np.ndarray, weights: np.ndarray, b: NonLocalField, grid: TimeGrid, scheme: Scheme = "rk4"
) -> np.ndarray:
    """Move weighted atoms along b(t, x, mu_t); mu_t keeps the weights. Returns (nodes, n, d)."""
    x = np.array(atoms, dtype=float)
    w = np.asarray(weights, dtype=float)
    out = np.empty((grid.steps + 1,) + x.shape)
    out[0] = x
    nodes, h = grid.nodes, grid.h
    for k in range(grid.steps):
        x = _step(b, nodes[k], h, x, w, scheme)
        if not np.all(np.isfinite(x)):
            raise IntegrationBlowUp(f"integration blow-up at t={nodes[k + 1]!r}")
        out[k + 1] = x
    return out


def integrate_particles(
    config0: ParticleConfiguration, b: NonLocalField, grid: TimeGrid, scheme: Scheme = "rk4"
) -> ParticlePath:
    if config0.n == 0:
        raise NestedOTError("empty configuration")
    w = np.full(config0.n, 1.0 / config0.n)
    return ParticlePath(grid, integrate_weighted(config0.points, w, b, grid, scheme))


def evolve_ensemble(
    initial: Sequence[tuple[float, ParticleConfiguration]],
    b: NonLocalField,
    grid: TimeGrid,
    scheme: Scheme = "rk4",
    seed: int = 0,
) -> TrajectoryEnsemble:
    """Integrate each initial configuration independently; paths keep input order."""
    weights = np.array([w for w, _ in initial], dtype=float)
    if abs(weights.sum() - 1) > 1e-12:
        raise NestedOTError("initial weights must sum to 1")

    def run(item):
        idx, (_, cfg) = item
        try:
            return integrate_particles(cfg, b, grid, scheme)
        except NestedOTError as exc:
            raise type(exc)(f"path {idx}: {exc}") from exc

    paths = pmap(run, list(enumerate(initial)))
    return TrajectoryEnsemble(seed, tuple(paths), weights, scheme)


def ensemble_to_random_measure(ens: TrajectoryEnsemble, t_node: int) -> RandomMeasure:
    if not 0 <= t_node <= ens.grid.steps:
        raise NestedOTError("node index out of range")
    return RandomMeasure([pth.measure(t_node) for pth in ens.paths], ens.path_weights)


def ensemble_speed(ens: TrajectoryEnsemble, t_node: int, p: float = 2.0) -> float:
    """L^p norm of the central-difference particle velocities at an interior node."""
    if not 0 < t_node < ens.grid.steps:
        raise NestedOTError("interior node required")
    h = ens.grid.h
    total = 0.0
    for w, pth in zip(ens.path_weights, ens.paths):
        v = (pth.states[t_node + 1] - pth.states[t_node - 1]) / (2 * h)
        total += w * float(pth.particle_weights() @ np.linalg.norm(v, axis=1) ** p)
    return total ** (1.0 / p)
