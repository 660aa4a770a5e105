import json
import math

import numpy as np
import pytest

from nestedot.dynamics import (
    TimeGrid,
    TrajectoryEnsemble,
    ensemble_speed,
    ensemble_to_random_measure,
    evolve_ensemble,
    integrate_particles,
    integrate_weighted,
)
from nestedot.errors import IntegrationBlowUp, NestedOTError
from nestedot.fields import ZERO, Custom, Linear, ToBarycenter, lp_norm_against
from nestedot.generators import random_field, random_initial
from nestedot.measures import DiscreteMeasure, ParticleConfiguration, barycenter, measures_equal, random_measures_equal


def test_zero_field_constant_path(rng):
    cfg = ParticleConfiguration(rng.normal(size=(5, 2)))
    path = integrate_particles(cfg, ZERO, TimeGrid(0, 1, 10))
    for state in path.states:
        np.testing.assert_array_equal(state, cfg.points)


@pytest.mark.parametrize("scheme, steps, tol", [("rk4", 32, 1e-7), ("euler", 1000, 1e-3)])
def test_linear_decay(scheme, steps, tol):
    path = integrate_particles(ParticleConfiguration([[1.0]]), Linear([[-1.0]]), TimeGrid(0, 1, steps), scheme)
    assert abs(path.states[-1, 0, 0] - math.exp(-1)) <= tol


def test_rk4_fourth_order():
    errs = []
    for steps in (16, 32):
        path = integrate_particles(ParticleConfiguration([[1.0]]), Linear([[-1.0]]), TimeGrid(0, 1, steps))
        errs.append(abs(path.states[-1, 0, 0] - math.exp(-1)))
    assert 12 <= errs[0] / errs[1] <= 20


def test_euler_first_order():
    errs = []
    for steps in (64, 128):
        path = integrate_particles(ParticleConfiguration([[1.0]]), Linear([[-1.0]]), TimeGrid(0, 1, steps), "euler")
        errs.append(abs(path.states[-1, 0, 0] - math.exp(-1)))
    assert 1.8 <= errs[0] / errs[1] <= 2.2


@pytest.mark.parametrize("kappa", [0.5, 2.0])
def test_two_particles_contract_to_barycenter(kappa):
    grid = TimeGrid(0, 1, 64)
    path = integrate_particles(ParticleConfiguration([[-1.0], [1.0]]), ToBarycenter(kappa), grid)
    expected = np.exp(-kappa * grid.nodes)
    np.testing.assert_allclose(path.states[:, 1, 0], expected, atol=1e-8)
    np.testing.assert_allclose(path.states[:, 0, 0], -expected, atol=1e-8)
    np.testing.assert_allclose(path.states.mean(axis=1)[:, 0], 0.0, atol=1e-15)


def test_blow_up():
    b = Custom(lambda t, x, mu: np.full_like(x, np.inf))
    with pytest.raises(IntegrationBlowUp, match="integration blow-up at t="):
        integrate_particles(ParticleConfiguration([[1.0]]), b, TimeGrid(0, 1, 4))


def test_unknown_scheme():
    with pytest.raises(NestedOTError):
        integrate_particles(ParticleConfiguration([[1.0]]), ZERO, TimeGrid(0, 1, 4), "midpoint")


@pytest.mark.parametrize("args", [(1.0, 1.0, 4), (0.0, 1.0, 0)])
def test_bad_grid(args):
    with pytest.raises(NestedOTError):
        TimeGrid(*args)


# -- ensembles ---------------------------------------------------------------------


def test_single_configuration(rng):
    ens = evolve_ensemble([(1.0, ParticleConfiguration(rng.normal(size=(3, 2))))], ToBarycenter(1.0), TimeGrid(0, 1, 8))
    assert len(ens.paths) == 1


def test_identical_configurations_identical_paths(rng):
    cfg = ParticleConfiguration(rng.normal(size=(4, 2)))
    ens = evolve_ensemble([(0.5, cfg), (0.5, cfg)], random_field(rng, 2), TimeGrid(0, 1, 16))
    np.testing.assert_array_equal(ens.paths[0].states, ens.paths[1].states)


def test_mean_follows_linear_ode(rng):
    A = np.array([[-0.5, 1.0], [-1.0, -0.5]])
    grid = TimeGrid(0, 1, 64)
    init = random_initial(rng, 3, 4, 2)
    ens = evolve_ensemble(init, Linear(A), grid)
    m0 = barycenter(ensemble_to_random_measure(ens, 0)).mean()
    # closed form: m(t) = expm(tA) m0, with A = -0.5 I + J and J a rotation generator
    for k in (16, 64):
        t = grid.nodes[k]
        R = np.array([[math.cos(t), math.sin(t)], [-math.sin(t), math.cos(t)]])
        expected = math.exp(-0.5 * t) * R @ m0
        np.testing.assert_allclose(barycenter(ensemble_to_random_measure(ens, k)).mean(), expected, atol=1e-9)


def test_initial_weights_must_sum_to_one(rng):
    cfg = ParticleConfiguration(rng.normal(size=(2, 1)))
    with pytest.raises(NestedOTError):
        evolve_ensemble([(0.5, cfg), (0.4, cfg)], ZERO, TimeGrid(0, 1, 4))


def test_error_carries_path_index():
    good = ParticleConfiguration([[0.0]])
    bad = ParticleConfiguration([[1.0]])
    b = Custom(lambda t, x, mu: np.full_like(x, np.inf) if x[0] != 0 else x)
    with pytest.raises(IntegrationBlowUp, match="path 1"):
        evolve_ensemble([(0.5, good), (0.5, bad)], b, TimeGrid(0, 1, 4))


def test_random_measure_at_node_zero(rng):
    init = random_initial(rng, 3, 4, 2)
    ens = evolve_ensemble(init, ToBarycenter(1.0), TimeGrid(0, 1, 8))
    M0 = ensemble_to_random_measure(ens, 0)
    for (w, cfg), W, mu in zip(init, M0.outer_weights, M0.components):
        assert W == w
        np.testing.assert_array_equal(mu.atoms, cfg.points)
    with pytest.raises(NestedOTError):
        ensemble_to_random_measure(ens, 9)


def test_zero_field_same_random_measure(rng):
    ens = evolve_ensemble(random_initial(rng, 2, 3, 2), ZERO, TimeGrid(0, 1, 5))
    M0 = ensemble_to_random_measure(ens, 0)
    for k in range(6):
        assert random_measures_equal(ensemble_to_random_measure(ens, k), M0)


def test_barycenter_is_weighted_empirical(rng):
    ens = evolve_ensemble(random_initial(rng, 3, 4, 2), random_field(rng, 2), TimeGrid(0, 1, 10))
    k = 7
    bar = barycenter(ensemble_to_random_measure(ens, k))
    atoms = np.concatenate([pth.states[k] for pth in ens.paths])
    weights = np.concatenate([np.full(pth.n, w / pth.n) for w, pth in zip(ens.path_weights, ens.paths)])
    assert measures_equal(bar, DiscreteMeasure(atoms, weights))


def test_permutation_invariance(rng):
    init = random_initial(rng, 2, 5, 2)
    perm = [(w, ParticleConfiguration(cfg.points[::-1])) for w, cfg in init]
    b = ToBarycenter(0.7)
    grid = TimeGrid(0, 1, 8)
    a = ensemble_to_random_measure(evolve_ensemble(init, b, grid), 8)
    c = ensemble_to_random_measure(evolve_ensemble(perm, b, grid), 8)
    # the mean is summed in a different order, so atoms agree to rounding only
    for x, y in zip(a.components, c.components):
        np.testing.assert_allclose(x.atoms[::-1], y.atoms, rtol=0, atol=1e-14)
        np.testing.assert_array_equal(x.weights, y.weights)


def test_determinism(rng):
    init = random_initial(rng, 4, 5, 2)
    b = random_field(rng, 2)
    a = evolve_ensemble(init, b, TimeGrid(0, 1, 20), seed=3)
    c = evolve_ensemble(init, b, TimeGrid(0, 1, 20), seed=3)
    assert json.dumps(a.to_dict()) == json.dumps(c.to_dict())


# -- speed -----------------------------------------------------------------------------


def test_speed_zero_field(rng):
    ens = evolve_ensemble(random_initial(rng, 2, 3, 2), ZERO, TimeGrid(0, 1, 8))
    assert ensemble_speed(ens, 4) == 0.0


def test_speed_requires_interior(rng):
    ens = evolve_ensemble(random_initial(rng, 1, 2, 1), ZERO, TimeGrid(0, 1, 8))
    for k in (0, 8):
        with pytest.raises(NestedOTError, match="interior node required"):
            ensemble_speed(ens, k)


def test_speed_linear_decay():
    grid = TimeGrid(0, 1, 100)
    ens = evolve_ensemble([(1.0, ParticleConfiguration([[1.0]]))], Linear([[-1.0]]), grid)
    for k in (1, 50, 99):
        assert abs(ensemble_speed(ens, k) - math.exp(-grid.nodes[k])) <= 2 * grid.h**2


@pytest.mark.parametrize("seed", range(4))
def test_speed_matches_field_norm(seed):
    rng = np.random.default_rng(seed)
    b = random_field(rng, 2)
    for steps in (64,):
        grid = TimeGrid(0, 1, steps)
        ens = evolve_ensemble(random_initial(rng, 3, 4, 2), b, grid)
        for k in (1, steps // 2, steps - 1):
            M = ensemble_to_random_measure(ens, k)
            assert abs(ensemble_speed(ens, k) - lp_norm_against(b, M, grid.nodes[k], 2.0)) <= 10 * grid.h**2


# -- serialization --------------------------------------------------------------------


def test_json_round_trip(rng):
    ens = evolve_ensemble(random_initial(rng, 2, 3, 2), ToBarycenter(1.0), TimeGrid(0, 0.5, 6), seed=11)
    back = TrajectoryEnsemble.from_dict(json.loads(json.dumps(ens.to_dict())))
    assert back.seed == 11 and back.grid == ens.grid
    for a, b in zip(ens.paths, back.paths):
        np.testing.assert_array_equal(a.states, b.states)


def test_json_missing_key():
    with pytest.raises(NestedOTError, match="missing key"):
        TrajectoryEnsemble.from_dict({"grid": {"t0": 0, "t1": 1, "steps": 1}, "paths": []})


def test_csv_rows(rng):
    ens = evolve_ensemble(random_initial(rng, 2, 3, 2), ZERO, TimeGrid(0, 1, 4))
    lines = ens.to_csv().strip().split("\n")
    assert lines[0] == "path,node,t,particle,x0,x1"
    assert len(lines) == 1 + 2 * 5 * 3


def test_weighted_integration_keeps_weights():
    atoms = np.array([[0.0], [3.0]])
    w = np.array([0.75, 0.25])
    out = integrate_weighted(atoms, w, ToBarycenter(1.0), TimeGrid(0, 1, 32))
    # the weighted mean is preserved by to_barycenter
    np.testing.assert_allclose(w @ out[:, :, 0].T, 0.75, atol=1e-14)
