"""Cylinder functions F(mu) = Psi(int phi_1 dmu, ..., int phi_k dmu) and their gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import NestedOTError
from .fields import NonLocalField
from .measures import DiscreteMeasure, RandomMeasure, lift

SINGULAR_RTOL = 1e-10


class TestFunction:
    """Bounded C^1 function on R^d with bounded gradient."""

    __test__ = False  # not a pytest class

    dim: int

    def value(self, x: np.ndarray) -> np.ndarray:
        """Values at points ``x`` of shape (n, d) -> (n,)."""
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_bound(self) -> float:
        return float("inf")

    def to_dict(self) -> dict:
        raise NestedOTError("test function is not serializable")


@dataclass(frozen=True, eq=False)
class GaussianBump(TestFunction):
    """exp(-|x - c|^2 / (2 sigma^2)); unit height at the center."""

    center: np.ndarray
    sigma: float = 1.0

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if not self.sigma > 0:
            raise NestedOTError("bump width must be positive")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def value(self, x):
        z = x - self.center
        return np.exp(-np.sum(z * z, axis=-1) / (2 * self.sigma**2))

    def grad(self, x):
        z = x - self.center
        return -(z / self.sigma**2) * self.value(x)[..., None]

    def grad_bound(self):
        # max of r/s^2 exp(-r^2/2s^2) is at r = s
        return float(np.exp(-0.5) / self.sigma)

    def to_dict(self):
        return {"kind": "gaussian", "c": self.center.tolist(), "sigma": self.sigma}


@dataclass(frozen=True, eq=False)
class CoordinateBump(TestFunction):
    """exp(-(x_axis - center)^2 / (2 width^2)), constant along the other axes."""

    dim: int
    axis: int
    center: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        if not 0 <= self.axis < self.dim:
            raise NestedOTError("axis out of range")

    def value(self, x):
        z = x[..., self.axis] - self.center
        return np.exp(-z * z / (2 * self.width**2))

    def grad(self, x):
        g = np.zeros_like(x, dtype=float)
        z = x[..., self.axis] - self.center
        g[..., self.axis] = -(z / self.width**2) * np.exp(-z * z / (2 * self.width**2))
        return g

    def grad_bound(self):
        return float(np.exp(-0.5) / self.width)

    def to_dict(self):
        return {"kind": "coordinate", "dim": self.dim, "axis": self.axis, "center": self.center, "width": self.width}


@dataclass(frozen=True, eq=False)
class CustomTest(TestFunction):
    dim: int
    fn: Callable[[np.ndarray], np.ndarray]
    grad_fn: Callable[[np.ndarray], np.ndarray]

    def value(self, x):
        return np.asarray(self.fn(x), dtype=float)

    def grad(self, x):
        return np.asarray(self.grad_fn(x), dtype=float)


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Psi(s) = sum_alpha c_alpha s^alpha over multi-indices alpha."""

    nvars: int
    terms: tuple[tuple[tuple[int, ...], float], ...]

    @classmethod
    def from_coeffs(cls, nvars: int, coeffs: Mapping) -> "Polynomial":
        terms = []
        for alpha, c in coeffs.items():
            if isinstance(alpha, str):
                alpha = tuple(int(a) for a in alpha.split(",")) if alpha else ()
            alpha = tuple(alpha) + (0,) * (nvars - len(tuple(alpha)))
            if len(alpha) != nvars or min(alpha, default=0) < 0:
                raise NestedOTError(f"bad multi-index {alpha!r}")
            terms.append((alpha, float(c)))
        return cls(nvars, tuple(terms))

    @classmethod
    def linear(cls, coefs: Sequence[float]) -> "Polynomial":
        k = len(coefs)
        return cls(k, tuple((tuple(int(i == r) for i in range(k)), float(c)) for r, c in enumerate(coefs)))

    def __call__(self, s) -> float:
        s = np.asarray(s, dtype=float)
        return float(sum(c * np.prod(s ** np.array(a)) for a, c in self.terms))

    def grad(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        g = np.zeros(self.nvars)
        for a, c in self.terms:
            for i, ai in enumerate(a):
                if ai == 0:
                    continue
                e = np.array(a)
                e[i] -= 1
                g[i] += c * ai * np.prod(s ** e)
        return g

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        out: dict[tuple[int, ...], float] = {}
        for a, c in self.terms:
            for b, d in other.terms:
                key = tuple(x + y for x, y in zip(a, b))
                out[key] = out.get(key, 0.0) + c * d
        return Polynomial(self.nvars, tuple(out.items()))

    def to_dict(self) -> dict:
        return {"coeffs": {",".join(map(str, a)): c for a, c in self.terms}}


@dataclass(frozen=True, eq=False)
class CylinderFunction:
    phis: tuple[TestFunction, ...]
    psi: Polynomial

    def __post_init__(self):
        object.__setattr__(self, "phis", tuple(self.phis))
        if not self.phis:
            raise NestedOTError("a cylinder function needs at least one test function")
        if self.psi.nvars != len(self.phis):
            raise NestedOTError("outer polynomial arity does not match the number of test functions")
        if len({phi.dim for phi in self.phis}) != 1:
            raise NestedOTError("dimension mismatch between test functions")

    @property
    def dim(self) -> int:
        return self.phis[0].dim

    @property
    def k(self) -> int:
        return len(self.phis)

    def __mul__(self, other: "CylinderFunction") -> "CylinderFunction":
        """Product F*G as a cylinder function over the concatenated test functions."""
        k, l = self.k, other.k
        lhs = Polynomial(k + l, tuple((a + (0,) * l, c) for a, c in self.psi.terms))
        rhs = Polynomial(k + l, tuple(((0,) * k + b, c) for b, c in other.psi.terms))
        return CylinderFunction(self.phis + other.phis, lhs * rhs)

    def to_dict(self) -> dict:
        return {"phis": [phi.to_dict() for phi in self.phis], "psi": self.psi.to_dict()}


def test_function_from_dict(d: dict) -> TestFunction:
    kind = d.get("kind")
    if kind == "gaussian":
        return GaussianBump(np.asarray(d["c"], dtype=float), float(d["sigma"]))
    if kind == "coordinate":
        return CoordinateBump(int(d["dim"]), int(d["axis"]), float(d.get("center", 0.0)), float(d.get("width", 1.0)))
    raise NestedOTError(f"unknown test function kind {kind!r}")


def cylinder_from_dict(d: dict) -> CylinderFunction:
    try:
        phis = tuple(test_function_from_dict(x) for x in d["phis"])
        return CylinderFunction(phis, Polynomial.from_coeffs(len(phis), d["psi"]["coeffs"]))
    except KeyError as exc:
        raise NestedOTError(f"missing key {exc.args[0]!r} in cylinder function") from None


# -- evaluation ---------------------------------------------------------------


def _features(F: CylinderFunction, atoms: np.ndarray, weights: np.ndarray) -> np.ndarray:
    if atoms.shape[1] != F.dim:
        raise NestedOTError("dimension mismatch")
    return np.array([weights @ phi.value(atoms) for phi in F.phis])


def linear_features(F: CylinderFunction, mu: DiscreteMeasure) -> np.ndarray:
    """(int phi_1 dmu, ..., int phi_k dmu)."""
    return _features(F, mu.atoms, mu.weights)


def eval_cylinder(F: CylinderFunction, mu: DiscreteMeasure) -> float:
    return F.psi(linear_features(F, mu))


def eval_cylinder_weighted(F: CylinderFunction, atoms: np.ndarray, weights: np.ndarray) -> float:
    """Evaluate on an arbitrary (possibly signed) finite combination of Diracs."""
    return F.psi(_features(F, np.asarray(atoms, dtype=float), np.asarray(weights, dtype=float)))


def gradient_at(F: CylinderFunction, x: np.ndarray, mu: DiscreteMeasure) -> np.ndarray:
    """Wasserstein gradient at a batch of points ``x`` of shape (n, d)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != F.dim:
        raise NestedOTError("dimension mismatch")
    dpsi = F.psi.grad(linear_features(F, mu))
    out = np.zeros_like(x, dtype=float)
    for c, phi in zip(dpsi, F.phis):
        out = out + c * phi.grad(x)
    return out


def wasserstein_gradient(F: CylinderFunction, x, mu: DiscreteMeasure) -> np.ndarray:
    """sum_i d_i Psi(L(mu)) grad phi_i(x) at a single point."""
    return gradient_at(F, np.asarray(x, dtype=float).reshape(1, -1), mu)[0]


def gradient_by_mixing(F: CylinderFunction, x, mu: DiscreteMeasure, eps: float = 1e-4, h: float = 1e-4) -> np.ndarray:
    """Finite-difference oracle for the gradient.

    Differentiates eps -> F((1 - eps) mu + eps delta_x) at 0 by central
    differences (the mixture is linear in eps so negative eps is a signed
    measure), then differentiates the result in x, also by central differences.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    atoms = np.vstack([mu.atoms, x[None, :]])

    def mix_derivative(y: np.ndarray) -> float:
        atoms[-1] = y
        plus = np.append((1 - eps) * mu.weights, eps)
        minus = np.append((1 + eps) * mu.weights, -eps)
        return (eval_cylinder_weighted(F, atoms, plus) - eval_cylinder_weighted(F, atoms, minus)) / (2 * eps)

    g = np.zeros_like(x)
    for k in range(x.shape[0]):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (mix_derivative(x + e) - mix_derivative(x - e)) / (2 * h)
    return g


def field_pairing(F: CylinderFunction, b: NonLocalField, mu: DiscreteMeasure, t: float = 0.0) -> float:
    """int b(t, x, mu) . grad_W F(x, mu) dmu(x)."""
    v = b.velocity(t, mu.atoms, mu.atoms, mu.weights)
    g = gradient_at(F, mu.atoms, mu)
    return float(mu.weights @ np.sum(v * g, axis=1))


def chain_rule_check(F: CylinderFunction, mu: DiscreteMeasure, b: NonLocalField, t: float = 0.0) -> float:
    """|B[F] - sum_i d_i Psi(L(mu)) B[L_phi_i]| for the pairing B induced by ``b``."""
    lhs = field_pairing(F, b, mu, t)
    v = b.velocity(t, mu.atoms, mu.atoms, mu.weights)
    dpsi = F.psi.grad(linear_features(F, mu))
    rhs = 0.0
    for c, phi in zip(dpsi, F.phis):
        rhs += c * float(mu.weights @ np.sum(v * phi.grad(mu.atoms), axis=1))
    return abs(lhs - rhs)


# -- tangent projection (p = 2) ------------------------------------------------


def gradients_on_lift(basis: Sequence[CylinderFunction], M: RandomMeasure) -> np.ndarray:
    """Array (r, n, d): gradient of basis member r at lifted support point n."""
    return np.stack(
        [np.concatenate([gradient_at(F, c.atoms, c) for c in M.components], axis=0) for F in basis]
    )


def lifted_inner(u: np.ndarray, v: np.ndarray, M: RandomMeasure) -> float:
    """L^2 inner product over the lifted measure on R^d x P(R^d)."""
    _, mass, _ = lift(M)
    return float(mass @ np.sum(u * v, axis=-1))


def projection_coefficients(b_samples: np.ndarray, basis: Sequence[CylinderFunction], M: RandomMeasure) -> np.ndarray:
    _, mass, _ = lift(M)
    G = gradients_on_lift(basis, M)
    b_samples = np.asarray(b_samples, dtype=float)
    if b_samples.shape != G.shape[1:]:
        raise NestedOTError("field samples do not match the lifted support")
    sw = np.sqrt(mass)[:, None]
    A = (G * sw[None]).reshape(len(basis), -1).T
    rhs = (b_samples * sw).reshape(-1)
    coef, *_ = np.linalg.lstsq(A, rhs, rcond=SINGULAR_RTOL)
    return coef


def tangent_projection(b_samples: np.ndarray, basis: Sequence[CylinderFunction], M: RandomMeasure) -> np.ndarray:
    """Closest point to ``b_samples`` in the span of the basis gradients (lifted L^2 norm).

    Rank-deficient bases get the minimal-norm coefficient vector; singular
    values below 1e-10 of the largest are treated as zero.
    """
    coef = projection_coefficients(b_samples, basis, M)
    return np.tensordot(coef, gradients_on_lift(basis, M), axes=1)
