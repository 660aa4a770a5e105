import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import measures, random_measures
from nestedot.errors import NestedOTError
from nestedot.generators import random_affine, random_random_measure
from nestedot.measures import (
    DiscreteMeasure,
    ParticleConfiguration,
    RandomMeasure,
    barycenter,
    canonical,
    canonical_random,
    empirical_map,
    lift,
    measures_equal,
    p_moment,
    pushforward,
    pushforward_measure,
    random_measures_equal,
)


# -- empirical map ---------------------------------------------------------------


@pytest.mark.parametrize(
    "points, atoms, weights",
    [
        ([[0.0], [2.0]], [[0.0], [2.0]], [0.5, 0.5]),
        ([[1.0, 1.0]], [[1.0, 1.0]], [1.0]),
        ([[0.0], [0.0], [3.0]], [[0.0], [0.0], [3.0]], [1 / 3, 1 / 3, 1 / 3]),
    ],
)
def test_empirical_map_examples(points, atoms, weights):
    mu = empirical_map(ParticleConfiguration(points))
    np.testing.assert_array_equal(mu.atoms, atoms)
    np.testing.assert_allclose(mu.weights, weights, rtol=0, atol=1e-15)


def test_empirical_map_empty():
    with pytest.raises(NestedOTError, match="empty configuration"):
        empirical_map(ParticleConfiguration(np.zeros((0, 2)), dim=2))


@given(measures(uniform=True), st.randoms(use_true_random=False))
def test_empirical_map_permutation_invariant(mu, r):
    pts = mu.atoms.tolist()
    shuffled = pts[:]
    r.shuffle(shuffled)
    a = empirical_map(ParticleConfiguration(pts))
    b = empirical_map(ParticleConfiguration(shuffled))
    assert measures_equal(a, b)


# -- barycenter -------------------------------------------------------------------


def test_barycenter_of_dirac_outer():
    mu = DiscreteMeasure([[0.0], [1.0]], [0.3, 0.7])
    assert measures_equal(barycenter(RandomMeasure.dirac(mu)), mu)


def test_barycenter_of_dirac_mixture():
    M = RandomMeasure([DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([1.0])], [0.5, 0.5])
    assert measures_equal(barycenter(M), DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5]))


def test_barycenter_weighted_products():
    mu_a = DiscreteMeasure([[0.0], [1.0]], [0.3, 0.7])
    mu_b = DiscreteMeasure.dirac([2.0])
    bar = canonical(barycenter(RandomMeasure([mu_a, mu_b], [0.5, 0.5])))
    np.testing.assert_array_equal(bar.atoms.ravel(), [0.0, 1.0, 2.0])
    np.testing.assert_allclose(bar.weights, [0.15, 0.35, 0.5], rtol=0, atol=1e-15)


@given(random_measures(max_outer=4, max_inner=4))
def test_barycenter_mass(M):
    assert abs(barycenter(M).weights.sum() - 1.0) <= 1e-12


@given(random_measures())
def test_barycenter_integrates_like_double_integral(M):
    f = lambda x: np.sin(x).sum(axis=1)
    double = sum(w * c.integrate(f) for w, c in zip(M.outer_weights, M.components))
    assert barycenter(M).integrate(f) == pytest.approx(double, abs=1e-12)


# -- push-forward --------------------------------------------------------------


@given(random_measures())
def test_pushforward_identity(M):
    assert random_measures_equal(pushforward(M, lambda x: x), M)


@given(random_measures(), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_pushforward_translation(M, c):
    c = np.array(c)
    N = pushforward(M, lambda x: x + c)
    for a, b in zip(M.components, N.components):
        np.testing.assert_array_equal(b.atoms, a.atoms + c)
        np.testing.assert_array_equal(b.weights, a.weights)
    np.testing.assert_array_equal(N.outer_weights, M.outer_weights)


def test_pushforward_map_failure():
    def bad(x):
        raise RuntimeError("boom")

    with pytest.raises(NestedOTError, match="map evaluation failure"):
        pushforward(RandomMeasure.dirac(DiscreteMeasure.dirac([0.0])), bad)


@pytest.mark.parametrize("seed", range(20))
def test_barycenter_pushforward_commute(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 4))
    M = random_random_measure(rng, int(rng.integers(1, 5)), 4, d)
    f = random_affine(rng, d, int(rng.integers(1, 4)))
    assert measures_equal(barycenter(pushforward(M, f)), pushforward_measure(barycenter(M), f))


# -- p-moment --------------------------------------------------------------------


@pytest.mark.parametrize(
    "atoms, weights, p, expected",
    [
        ([[0.0]], [1.0], 2.0, 0.0),
        ([[-1.0], [1.0]], [0.5, 0.5], 2.0, 1.0),
        ([[0.0], [2.0]], [0.25, 0.75], 1.0, 1.5),
    ],
)
def test_p_moment_examples(atoms, weights, p, expected):
    assert p_moment(DiscreteMeasure(atoms, weights), p, [0.0]) == pytest.approx(expected, abs=1e-15)


def test_p_moment_invalid_exponent():
    with pytest.raises(NestedOTError, match="invalid exponent"):
        p_moment(DiscreteMeasure.dirac([0.0]), 0.5)


# -- construction and serialization --------------------------------------------------


def test_renormalizes_small_drift():
    mu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5 + 5e-10])
    assert abs(mu.weights.sum() - 1.0) <= 1e-15


def test_rejects_bad_sum():
    with pytest.raises(NestedOTError):
        DiscreteMeasure([[0.0], [1.0]], [0.5, 0.6])


@pytest.mark.parametrize(
    "atoms, weights",
    [([[0.0]], [-1.0]), ([[np.nan]], [1.0]), ([[0.0], [1.0]], [1.0]), ([], [])],
)
def test_rejects_invalid(atoms, weights):
    with pytest.raises(NestedOTError):
        DiscreteMeasure(atoms, weights, dim=1)


def test_rejects_dim_mismatch():
    with pytest.raises(NestedOTError, match="dimension mismatch"):
        DiscreteMeasure([[0.0, 1.0]], [1.0], dim=3)
    with pytest.raises(NestedOTError):
        RandomMeasure([DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([0.0, 1.0])])


def test_arrays_are_read_only():
    mu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    with pytest.raises(ValueError):
        mu.atoms[0, 0] = 3.0


@given(random_measures(max_outer=4))
def test_json_round_trip_is_exact(M):
    back = RandomMeasure.from_dict(json.loads(json.dumps(M.to_dict())))
    for a, b in zip(M.components, back.components):
        np.testing.assert_array_equal(a.atoms, b.atoms)
        np.testing.assert_array_equal(a.weights, b.weights)
    np.testing.assert_array_equal(M.outer_weights, back.outer_weights)


# -- canonical forms -------------------------------------------------------------


def test_canonical_merges_exact_duplicates_only():
    mu = DiscreteMeasure([[1.0], [0.0], [1.0], [1.0 + 1e-15]], [0.25, 0.25, 0.25, 0.25])
    c = canonical(mu)
    np.testing.assert_array_equal(c.atoms.ravel(), [0.0, 1.0, 1.0 + 1e-15])
    np.testing.assert_array_equal(c.weights, [0.25, 0.5, 0.25])


def test_canonical_drops_zero_weights():
    mu = DiscreteMeasure([[0.0], [5.0]], [1.0, 0.0])
    assert canonical(mu).size == 1


def test_canonical_random_merges_equal_components():
    a = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    b = DiscreteMeasure([[1.0], [0.0]], [0.5, 0.5])
    M = canonical_random(RandomMeasure([a, b, DiscreteMeasure.dirac([3.0])], [0.2, 0.3, 0.5]))
    assert M.size == 2
    assert sorted(M.outer_weights.tolist()) == [0.5, 0.5]


def test_lift_masses():
    M = RandomMeasure([DiscreteMeasure([[0.0], [1.0]], [0.25, 0.75]), DiscreteMeasure.dirac([2.0])], [0.4, 0.6])
    atoms, mass, comp = lift(M)
    np.testing.assert_array_equal(atoms.ravel(), [0.0, 1.0, 2.0])
    np.testing.assert_allclose(mass, [0.1, 0.3, 0.6], rtol=0, atol=1e-16)
    np.testing.assert_array_equal(comp, [0, 0, 1])
