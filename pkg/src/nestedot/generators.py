"""Seeded random instances for tests, acceptance checks and scripts."""

from __future__ import annotations

import numpy as np

from .cylinder import CylinderFunction, GaussianBump, Polynomial
from .fields import Convolution, Linear, NonLocalField, Sum, TimeProfile, TimeScaled, ToBarycenter
from .measures import DiscreteMeasure, ParticleConfiguration, RandomMeasure


def random_measure(rng: np.random.Generator, n: int, d: int, uniform: bool = False, spread: float = 1.0) -> DiscreteMeasure:
    atoms = spread * rng.normal(size=(n, d))
    w = np.full(n, 1.0 / n) if uniform else rng.dirichlet(np.ones(n))
    return DiscreteMeasure(atoms, w)


def random_random_measure(
    rng: np.random.Generator, outer: int, inner_max: int, d: int, uniform_outer: bool = False
) -> RandomMeasure:
    comps = [random_measure(rng, int(rng.integers(1, inner_max + 1)), d) for _ in range(outer)]
    w = np.full(outer, 1.0 / outer) if uniform_outer else rng.dirichlet(np.ones(outer))
    return RandomMeasure(comps, w)


def random_polynomial(rng: np.random.Generator, k: int, degree: int = 3, nterms: int = 4) -> Polynomial:
    coeffs = {}
    for _ in range(nterms):
        alpha = tuple(int(a) for a in rng.multinomial(int(rng.integers(1, degree + 1)), np.ones(k) / k))
        coeffs[alpha] = coeffs.get(alpha, 0.0) + float(rng.uniform(-1, 1))
    return Polynomial.from_coeffs(k, coeffs)


def random_cylinder(rng: np.random.Generator, d: int, k: int | None = None) -> CylinderFunction:
    k = int(rng.integers(1, 4)) if k is None else k
    phis = tuple(GaussianBump(rng.normal(size=d), float(rng.uniform(0.6, 1.5))) for _ in range(k))
    return CylinderFunction(phis, random_polynomial(rng, k))


def random_field(rng: np.random.Generator, d: int) -> NonLocalField:
    """One of the built-in Lipschitz fields with random parameters."""
    kind = int(rng.integers(0, 4))
    if kind == 0:
        return ToBarycenter(float(rng.uniform(0.2, 2.0)))
    if kind == 1:
        return Linear(rng.normal(scale=0.7, size=(d, d)))
    if kind == 2:
        return Convolution(float(rng.uniform(0.5, 1.5)), float(rng.uniform(-1.0, 1.0)))
    return Sum(
        (
            ToBarycenter(float(rng.uniform(0.2, 1.0))),
            TimeScaled(TimeProfile((tuple(rng.uniform(-1, 1, size=2)),)), Convolution(1.0, 1.0)),
        )
    )


def random_initial(rng: np.random.Generator, paths: int, particles: int, d: int) -> list[tuple[float, ParticleConfiguration]]:
    w = rng.dirichlet(np.ones(paths))
    return [(float(wi), ParticleConfiguration(rng.normal(size=(particles, d)))) for wi in w]


def random_affine(rng: np.random.Generator, d: int, e: int | None = None):
    e = d if e is None else e
    A = rng.normal(size=(e, d))
    c = rng.normal(size=e)
    return lambda x: A @ x + c
