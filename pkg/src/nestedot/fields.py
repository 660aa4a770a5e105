"""Non-local vector fields b(t, x, mu) as immutable expression trees.

Every node evaluates a batch of positions against one discrete measure given
by raw ``(atoms, weights)`` arrays, which keeps the particle integrators free
of per-stage object construction. Trees round-trip through JSON; ``Custom``
wraps an arbitrary callable for library use and cannot be serialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NestedOTError
from .measures import DiscreteMeasure, RandomMeasure, lift
from .ot_core import Coupling, OTResult


class NonLocalField:
    """Base class; subclasses implement ``velocity`` and ``to_dict``."""

    def velocity(self, t: float, x: np.ndarray, atoms: np.ndarray, weights: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def lipschitz_bound(self, t: float) -> float:
        """Constant L with ||b(t,.,mu0) - b(t,.,mu1)||_{L^p(pi)} <= L W_p(mu0, mu1) for optimal pi."""
        return float("inf")

    def spatial_lipschitz_bound(self, t: float) -> float:
        return float("inf")

    def to_dict(self) -> dict:
        raise NestedOTError("field is not serializable")

    def __call__(self, t: float, x, mu: DiscreteMeasure) -> np.ndarray:
        return eval_field(self, t, x, mu)


@dataclass(frozen=True, eq=False)
class Linear(NonLocalField):
    A: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise NestedOTError("linear field needs a square matrix")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    def velocity(self, t, x, atoms, weights):
        if x.shape[1] != self.A.shape[0]:
            raise NestedOTError("dimension mismatch")
        return x @ self.A.T

    def lipschitz_bound(self, t):
        return float(np.linalg.norm(self.A, 2))

    spatial_lipschitz_bound = lipschitz_bound

    def to_dict(self):
        return {"kind": "linear", "A": self.A.tolist()}


@dataclass(frozen=True, eq=False)
class Constant(NonLocalField):
    v: np.ndarray

    def __post_init__(self):
        v = np.array(self.v, dtype=float).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    def velocity(self, t, x, atoms, weights):
        if x.shape[1] != self.v.shape[0]:
            raise NestedOTError("dimension mismatch")
        return np.broadcast_to(self.v, x.shape).copy()

    def lipschitz_bound(self, t):
        return 0.0

    spatial_lipschitz_bound = lipschitz_bound

    def to_dict(self):
        return {"kind": "constant", "v": self.v.tolist()}


@dataclass(frozen=True, eq=False)
class ToBarycenter(NonLocalField):
    """b = kappa * (mean(mu) - x)."""

    kappa: float = 1.0

    def velocity(self, t, x, atoms, weights):
        m = weights @ atoms
        return self.kappa * (m[None, :] - x)

    def lipschitz_bound(self, t):
        return 2.0 * abs(self.kappa)

    def spatial_lipschitz_bound(self, t):
        return abs(self.kappa)

    def to_dict(self):
        return {"kind": "to_barycenter", "kappa": self.kappa}


@dataclass(frozen=True, eq=False)
class Convolution(NonLocalField):
    """b(x) = sum_k w_k K(x - y_k) with K(z) = -scale * z * exp(-|z|^2 / sigma^2).

    K is the gradient of a Gaussian, so the field is an attraction (scale > 0)
    or repulsion (scale < 0). K is globally Lipschitz with constant |scale|.
    """

    sigma: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise NestedOTError("kernel width must be positive")

    def kernel(self, z: np.ndarray) -> np.ndarray:
        r2 = np.sum(z * z, axis=-1, keepdims=True)
        return -self.scale * z * np.exp(-r2 / self.sigma**2)

    def velocity(self, t, x, atoms, weights):
        z = x[:, None, :] - atoms[None, :, :]
        return np.einsum("k,nkd->nd", weights, self.kernel(z))

    def lipschitz_bound(self, t):
        return 2.0 * abs(self.scale)

    def spatial_lipschitz_bound(self, t):
        return abs(self.scale)

    def to_dict(self):
        return {"kind": "convolution", "kernel": {"type": "gaussian_grad", "sigma": self.sigma, "scale": self.scale}}


@dataclass(frozen=True, eq=False)
class TimeProfile:
    """Piecewise polynomial g(t); coefficients in increasing degree.

    ``breaks`` are the interior breakpoints; piece k covers [breaks[k-1], breaks[k]).
    """

    polys: tuple[tuple[float, ...], ...]
    breaks: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.polys) != len(self.breaks) + 1:
            raise NestedOTError("time profile needs one polynomial per piece")

    def __call__(self, t: float) -> float:
        k = int(np.searchsorted(self.breaks, t, side="right"))
        return float(np.polynomial.polynomial.polyval(t, self.polys[k]))

    def to_dict(self) -> dict:
        if not self.breaks:
            return {"poly": list(self.polys[0])}
        return {"breaks": list(self.breaks), "polys": [list(q) for q in self.polys]}

    @classmethod
    def from_dict(cls, d: dict) -> "TimeProfile":
        if "poly" in d:
            return cls((tuple(float(c) for c in d["poly"]),))
        return cls(tuple(tuple(float(c) for c in q) for q in d["polys"]), tuple(float(b) for b in d["breaks"]))


@dataclass(frozen=True, eq=False)
class TimeScaled(NonLocalField):
    g: TimeProfile
    inner: NonLocalField

    def velocity(self, t, x, atoms, weights):
        return self.g(t) * self.inner.velocity(t, x, atoms, weights)

    def lipschitz_bound(self, t):
        return abs(self.g(t)) * self.inner.lipschitz_bound(t)

    def spatial_lipschitz_bound(self, t):
        return abs(self.g(t)) * self.inner.spatial_lipschitz_bound(t)

    def to_dict(self):
        return {"kind": "time_scaled", "g": self.g.to_dict(), "inner": self.inner.to_dict()}


@dataclass(frozen=True, eq=False)
class Sum(NonLocalField):
    terms: tuple[NonLocalField, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def velocity(self, t, x, atoms, weights):
        out = np.zeros_like(x, dtype=float)
        for term in self.terms:
            out = out + term.velocity(t, x, atoms, weights)
        return out

    def lipschitz_bound(self, t):
        return float(sum(term.lipschitz_bound(t) for term in self.terms))

    def spatial_lipschitz_bound(self, t):
        return float(sum(term.spatial_lipschitz_bound(t) for term in self.terms))

    def to_dict(self):
        return {"kind": "sum", "terms": [term.to_dict() for term in self.terms]}


@dataclass(frozen=True, eq=False)
class Custom(NonLocalField):
    """Escape hatch: ``fn(t, x, mu) -> vector`` evaluated point by point."""

    fn: Callable[[float, np.ndarray, DiscreteMeasure], np.ndarray]
    lipschitz: float = float("inf")

    def velocity(self, t, x, atoms, weights):
        mu = DiscreteMeasure(atoms, weights)
        return np.stack([np.asarray(self.fn(t, xi, mu), dtype=float) for xi in x])

    def lipschitz_bound(self, t):
        return self.lipschitz


ZERO = Sum(())


def field_from_dict(d: dict) -> NonLocalField:
    try:
        kind = d["kind"]
        if kind == "linear":
            return Linear(np.asarray(d["A"], dtype=float))
        if kind == "constant":
            return Constant(np.asarray(d["v"], dtype=float))
        if kind == "to_barycenter":
            return ToBarycenter(float(d["kappa"]))
        if kind == "convolution":
            k = d["kernel"]
            if k.get("type", "gaussian_grad") != "gaussian_grad":
                raise NestedOTError(f"unknown kernel type {k['type']!r}")
            return Convolution(float(k.get("sigma", 1.0)), float(k.get("scale", 1.0)))
        if kind == "time_scaled":
            return TimeScaled(TimeProfile.from_dict(d["g"]), field_from_dict(d["inner"]))
        if kind == "sum":
            return Sum(tuple(field_from_dict(x) for x in d["terms"]))
        if kind == "zero":
            return ZERO
    except KeyError as exc:
        raise NestedOTError(f"missing key {exc.args[0]!r} in field") from None
    raise NestedOTError(f"unknown field kind {d.get('kind')!r}")


# -- operations ---------------------------------------------------------------


def eval_field(b: NonLocalField, t: float, x, mu: DiscreteMeasure) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(1, -1)
    if x.shape[1] != mu.dim:
        raise NestedOTError("dimension mismatch")
    v = np.asarray(b.velocity(t, x, mu.atoms, mu.weights), dtype=float)[0]
    if not np.all(np.isfinite(v)):
        raise NestedOTError("field evaluation is not finite")
    return v


def field_on_lift(b: NonLocalField, M: RandomMeasure, t: float) -> np.ndarray:
    """b(t, x, mu_i) at every atom x of every component mu_i, stacked like :func:`lift`."""
    return np.concatenate([b.velocity(t, c.atoms, c.atoms, c.weights) for c in M.components], axis=0)


def lp_norm_against(b: NonLocalField, M: RandomMeasure, t: float, p: float = 2.0) -> float:
    if p < 1:
        raise NestedOTError("invalid exponent")
    _, mass, _ = lift(M)
    v = np.linalg.norm(field_on_lift(b, M, t), axis=1)
    return float(mass @ v**p) ** (1.0 / p)


def lipschitz_certificate(
    b: NonLocalField,
    instances: Sequence[tuple[DiscreteMeasure, DiscreteMeasure, Coupling | OTResult]],
    t: float,
    p: float = 2.0,
) -> float:
    """Largest ratio (integral of |b(x0,mu0) - b(x1,mu1)|^p d plan) / W_p^p over the instances."""
    worst = 0.0
    for mu0, mu1, plan in instances:
        mass = plan.coupling.mass if isinstance(plan, OTResult) else plan.mass
        b0 = b.velocity(t, mu0.atoms, mu0.atoms, mu0.weights)
        b1 = b.velocity(t, mu1.atoms, mu1.atoms, mu1.weights)
        db = np.linalg.norm(b0[:, None, :] - b1[None, :, :], axis=2) ** p
        dx = np.linalg.norm(mu0.atoms[:, None, :] - mu1.atoms[None, :, :], axis=2) ** p
        num = float(np.sum(mass * db))
        den = float(np.sum(mass * dx))
        if den == 0.0:
            if num > 1e-14:
                raise NestedOTError("Lipschitz violation at coincident measures")
            continue
        worst = max(worst, num / den)
    return worst


def spatial_lipschitz_check(b: NonLocalField, mu: DiscreteMeasure, t: float) -> float:
    x = np.unique(mu.atoms, axis=0)
    if len(x) < 2:
        raise NestedOTError("insufficient support")
    v = b.velocity(t, x, mu.atoms, mu.weights)
    iu = np.triu_indices(len(x), k=1)
    dv = np.linalg.norm(v[iu[0]] - v[iu[1]], axis=1)
    dx = np.linalg.norm(x[iu[0]] - x[iu[1]], axis=1)
    return float(np.max(dv / dx))
