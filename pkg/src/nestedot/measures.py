"""Finitely supported measures on R^d and random measures built from them.

A :class:`DiscreteMeasure` is a weighted point cloud, a :class:`RandomMeasure`
is a finite mixture of discrete measures. Both are immutable: arrays are
copied on construction and marked read-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NestedOTError

RENORMALIZE_ATOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _normalized(weights: np.ndarray, what: str) -> np.ndarray:
    if weights.ndim != 1:
        raise NestedOTError(f"{what} must be a 1-d sequence")
    if not np.all(np.isfinite(weights)):
        raise NestedOTError(f"{what} must be finite")
    if np.any(weights < 0):
        raise NestedOTError(f"{what} must be nonnegative")
    s = float(weights.sum())
    if abs(s - 1.0) > RENORMALIZE_ATOL:
        raise NestedOTError(f"{what} sum to {s!r}, expected 1")
    # only rescale beyond summation rounding, so re-wrapping a measure keeps its bits
    if abs(s - 1.0) > weights.shape[0] * np.finfo(float).eps:
        weights = weights / s
    return weights


def _as_points(points, dim: int | None = None) -> np.ndarray:
    a = np.asarray(points, dtype=float)
    if a.ndim == 1:
        # a flat list is read as points on the line unless dim says otherwise
        a = a.reshape(-1, 1) if (dim is None or dim == 1) else a.reshape(1, -1)
    if a.ndim != 2:
        raise NestedOTError("atoms must be a sequence of points")
    if a.shape[0] == 0 and dim is not None:
        a = a.reshape(0, dim)
    if dim is not None and a.shape[1] != dim:
        raise NestedOTError(f"dimension mismatch: atoms have length {a.shape[1]}, dim is {dim}")
    if not np.all(np.isfinite(a)):
        raise NestedOTError("atoms must be finite")
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability measure sum_k weights[k] * delta_{atoms[k]} on R^dim."""

    atoms: np.ndarray
    weights: np.ndarray

    def __init__(self, atoms, weights, dim: int | None = None):
        a = _as_points(atoms, dim)
        w = np.asarray(weights, dtype=float).reshape(-1)
        if a.shape[0] == 0:
            raise NestedOTError("a measure needs at least one atom")
        if w.shape[0] != a.shape[0]:
            raise NestedOTError("atoms and weights differ in length")
        w = _normalized(w, "weights")
        object.__setattr__(self, "atoms", _frozen(a))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    @classmethod
    def dirac(cls, point) -> "DiscreteMeasure":
        return cls(np.atleast_2d(np.asarray(point, dtype=float)), [1.0])

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        a = _as_points(points)
        return cls(a, np.full(a.shape[0], 1.0 / a.shape[0]))

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """Integral of a vectorized scalar function ``f(points) -> (n,)``."""
        return float(self.weights @ np.asarray(f(self.atoms), dtype=float))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteMeasure":
        try:
            return cls(d["atoms"], d["weights"], dim=int(d["dim"]))
        except KeyError as exc:
            raise NestedOTError(f"missing key {exc.args[0]!r} in DiscreteMeasure") from None

    def __repr__(self) -> str:
        return f"DiscreteMeasure(dim={self.dim}, size={self.size})"


@dataclass(frozen=True, eq=False)
class RandomMeasure:
    """Finite mixture sum_i outer_weights[i] * delta_{components[i]}."""

    components: tuple[DiscreteMeasure, ...]
    outer_weights: np.ndarray

    def __init__(self, components: Sequence[DiscreteMeasure], outer_weights=None):
        comps = tuple(components)
        if not comps:
            raise NestedOTError("a random measure needs at least one component")
        dims = {c.dim for c in comps}
        if len(dims) != 1:
            raise NestedOTError("dimension mismatch between components")
        if outer_weights is None:
            outer_weights = np.full(len(comps), 1.0 / len(comps))
        w = np.asarray(outer_weights, dtype=float).reshape(-1)
        if w.shape[0] != len(comps):
            raise NestedOTError("components and outer_weights differ in length")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "outer_weights", _frozen(_normalized(w, "outer_weights")))

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def size(self) -> int:
        return len(self.components)

    @classmethod
    def dirac(cls, mu: DiscreteMeasure) -> "RandomMeasure":
        return cls([mu], [1.0])

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "outer_weights": self.outer_weights.tolist(),
            "components": [c.to_dict() for c in self.components],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomMeasure":
        try:
            comps = [DiscreteMeasure.from_dict(c) for c in d["components"]]
            M = cls(comps, d["outer_weights"])
        except KeyError as exc:
            raise NestedOTError(f"missing key {exc.args[0]!r} in RandomMeasure") from None
        if "dim" in d and int(d["dim"]) != M.dim:
            raise NestedOTError("dimension mismatch between dim and components")
        return M

    def __repr__(self) -> str:
        return f"RandomMeasure(dim={self.dim}, size={self.size})"


@dataclass(frozen=True, eq=False)
class ParticleConfiguration:
    """Ordered particle positions (x_1, ..., x_N) in R^dim."""

    points: np.ndarray

    def __init__(self, points, dim: int | None = None):
        a = _as_points(points, dim)
        object.__setattr__(self, "points", _frozen(a))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n(self) -> int:
        return self.points.shape[0]


def empirical_map(config: ParticleConfiguration) -> DiscreteMeasure:
    """Uniform measure (1/N) sum_i delta_{x_i}; duplicate points stay separate atoms."""
    if config.n == 0:
        raise NestedOTError("empty configuration")
    return DiscreteMeasure(config.points, np.full(config.n, 1.0 / config.n))


def barycenter(M: RandomMeasure) -> DiscreteMeasure:
    """Mean measure: all component atoms, weighted by outer * inner weight."""
    atoms = np.concatenate([c.atoms for c in M.components], axis=0)
    weights = np.concatenate([w * c.weights for w, c in zip(M.outer_weights, M.components)])
    return DiscreteMeasure(atoms, weights)


def _apply_map(f: Callable, atoms: np.ndarray) -> np.ndarray:
    try:
        out = [np.atleast_1d(np.asarray(f(x), dtype=float)) for x in atoms]
    except Exception as exc:  # noqa: BLE001 - any failure of a user map is reported uniformly
        raise NestedOTError(f"map evaluation failure: {exc}") from exc
    return np.stack(out)


def pushforward_measure(mu: DiscreteMeasure, f: Callable) -> DiscreteMeasure:
    return DiscreteMeasure(_apply_map(f, mu.atoms), mu.weights)


def pushforward(M: RandomMeasure, f: Callable) -> RandomMeasure:
    """Nested push-forward: map every atom of every component through ``f``."""
    return RandomMeasure([pushforward_measure(c, f) for c in M.components], M.outer_weights)


def p_moment(mu: DiscreteMeasure, p: float, anchor=None) -> float:
    if p < 1:
        raise NestedOTError("invalid exponent")
    anchor = np.zeros(mu.dim) if anchor is None else np.asarray(anchor, dtype=float).reshape(-1)
    if anchor.shape[0] != mu.dim:
        raise NestedOTError("dimension mismatch")
    r = np.linalg.norm(mu.atoms - anchor, axis=1)
    return float(mu.weights @ r**p)


def lift(M: RandomMeasure) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Support of the lifted measure on R^d x P(R^d).

    Returns stacked atoms, their lifted masses outer_w[i] * w[i][a], and the
    component index of each row.
    """
    atoms = np.concatenate([c.atoms for c in M.components], axis=0)
    mass = np.concatenate([w * c.weights for w, c in zip(M.outer_weights, M.components)])
    comp = np.concatenate([np.full(c.size, i) for i, c in enumerate(M.components)])
    return atoms, mass, comp


# -- canonical forms ---------------------------------------------------------


def canonical(mu: DiscreteMeasure) -> DiscreteMeasure:
    """Merge bit-equal atoms, drop zero-mass atoms, sort lexicographically."""
    order = np.lexsort((mu.weights,) + tuple(mu.atoms[:, k] for k in range(mu.dim - 1, -1, -1)))
    atoms = mu.atoms[order]
    weights = mu.weights[order]
    keep_atoms, keep_w = [], []
    for x, w in zip(atoms, weights):
        if keep_atoms and np.array_equal(keep_atoms[-1], x):
            keep_w[-1] += w
        else:
            keep_atoms.append(x)
            keep_w.append(w)
    keep_atoms = np.array(keep_atoms)
    keep_w = np.array(keep_w)
    nz = keep_w > 0
    return DiscreteMeasure(keep_atoms[nz], keep_w[nz])


def measures_equal(mu: DiscreteMeasure, nu: DiscreteMeasure, weight_atol: float = 0.0) -> bool:
    """Equality as measures: identical atoms after consolidation, weights within ``weight_atol``."""
    a, b = canonical(mu), canonical(nu)
    if a.dim != b.dim or a.size != b.size:
        return False
    return bool(np.array_equal(a.atoms, b.atoms) and np.allclose(a.weights, b.weights, rtol=0, atol=weight_atol))


def canonical_random(M: RandomMeasure, weight_atol: float = 0.0) -> RandomMeasure:
    """Canonicalize components, merge equal ones and sort by (atoms, weights)."""
    comps: list[DiscreteMeasure] = []
    outer: list[float] = []
    for w, c in zip(M.outer_weights, M.components):
        if w == 0:
            continue
        cc = canonical(c)
        for k, other in enumerate(comps):
            if measures_equal(cc, other, weight_atol):
                outer[k] += w
                break
        else:
            comps.append(cc)
            outer.append(float(w))

    def key(i: int):
        c = comps[i]
        return (c.size, tuple(c.atoms.ravel()), tuple(c.weights))

    order = sorted(range(len(comps)), key=key)
    return RandomMeasure([comps[i] for i in order], [outer[i] for i in order])


def random_measures_equal(M: RandomMeasure, N: RandomMeasure, weight_atol: float = 0.0) -> bool:
    a, b = canonical_random(M, weight_atol), canonical_random(N, weight_atol)
    if a.dim != b.dim or a.size != b.size:
        return False
    if not np.allclose(a.outer_weights, b.outer_weights, rtol=0, atol=weight_atol):
        return False
    return all(measures_equal(x, y, weight_atol) for x, y in zip(a.components, b.components))
