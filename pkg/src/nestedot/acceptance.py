"""Exit criteria of the toolkit, runnable without pytest (``nestedot selftest``).

Every check is seeded and pins its tolerance here; the pytest module and the
CLI both call :func:`run_all` or the individual checks.
"""

from __future__ import annotations

import io
import json
import math
import time
from contextlib import redirect_stdout
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import numpy as np

from . import generators as gen
from .cylinder import chain_rule_check, gradient_by_mixing, gradients_on_lift, lifted_inner, tangent_projection, wasserstein_gradient
from .dynamics import TimeGrid, ensemble_to_random_measure, evolve_ensemble, integrate_particles
from .fields import Linear, ToBarycenter, field_on_lift, lp_norm_against
from .geodesics import outer_geodesic_from_coupling, outer_geodesic_from_random_coupling
from .measures import (
    DiscreteMeasure,
    ParticleConfiguration,
    RandomMeasure,
    barycenter,
    measures_equal,
    pushforward,
    pushforward_measure,
    random_measures_equal,
)
from .nested import nested_distance, nested_wasserstein, optimal_random_coupling, random_coupling_cost
from .ot_core import brute_force_transport, brute_force_wasserstein, wasserstein
from .verify import benamou_brenier_check, cerm_residual, gronwall_uniqueness_check, observed_order


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    measured: float
    threshold: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d} {self.name}: {self.measured:.3e} ({self.threshold}) in {self.seconds:.2f}s"


def _timed(number: int, name: str, fn: Callable[[], tuple[bool, float, str]], budget: float | None = None) -> Criterion:
    t = time.perf_counter()
    ok, value, threshold = fn()
    dt = time.perf_counter() - t
    if budget is not None:
        ok = ok and dt < budget
        threshold += f", runtime < {budget:g}s"
    return Criterion(number, name, bool(ok), float(value), threshold, dt)


# -- 1 ------------------------------------------------------------------------


def _ot_instances(seed: int = 1, count: int = 200):
    rng = np.random.default_rng(seed)
    for k in range(count):
        d = int(rng.integers(1, 4))
        p = (1.0, 2.0, 3.0)[k % 3]
        if k % 5 == 0:
            n = int(rng.integers(1, 6))
            yield gen.random_measure(rng, n, d, uniform=True), gen.random_measure(rng, n, d, uniform=True), p
        else:
            n, m = (int(v) for v in rng.integers(1, 6, size=2))
            yield gen.random_measure(rng, n, d), gen.random_measure(rng, m, d), p


def ot_oracle_equivalence():
    worst = 0.0
    for mu, nu, p in _ot_instances():
        worst = max(worst, abs(wasserstein(mu, nu, p).cost - brute_force_wasserstein(mu, nu, p)))
    return worst <= 1e-9, worst, "max |W_p^p - oracle| <= 1e-9"


# -- 2, 3 ---------------------------------------------------------------------


def _nested_instances(seed: int = 2, count: int = 50):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        d = int(rng.integers(1, 4))
        M = gen.random_random_measure(rng, int(rng.integers(1, 4)), 4, d)
        N = gen.random_random_measure(rng, int(rng.integers(1, 4)), 4, d)
        yield M, N


def nested_oracle_value(M: RandomMeasure, N: RandomMeasure, p: float = 2.0) -> float:
    """Outer vertex enumeration over a cost matrix of inner brute-force values."""
    K = np.array([[brute_force_wasserstein(mu, nu, p) for nu in N.components] for mu in M.components])
    return brute_force_transport(M.outer_weights, N.outer_weights, K)


def nested_oracle_equivalence():
    worst = 0.0
    for M, N in _nested_instances():
        worst = max(worst, abs(nested_wasserstein(M, N, 2.0)[0] - nested_oracle_value(M, N, 2.0)))
    return worst <= 1e-9, worst, "max |WW_2^2 - oracle| <= 1e-9"


def random_coupling_identity():
    worst = 0.0
    for M, N in _nested_instances():
        cost, Pi = nested_wasserstein(M, N, 2.0)
        P = optimal_random_coupling(M, N, Pi, 2.0)
        worst = max(worst, abs(cost - random_coupling_cost(P, 2.0)))
    return worst <= 1e-9, worst, "max |WW_p^p - double integral over random coupling| <= 1e-9"


# -- 4 ------------------------------------------------------------------------


def nested_metric_axioms():
    rng = np.random.default_rng(4)
    worst = 0.0
    for k in range(100):
        d = int(rng.integers(1, 3))
        p = 1.0 if k % 4 == 0 else 2.0
        M, N, R = (gen.random_random_measure(rng, int(rng.integers(1, 4)), 3, d) for _ in range(3))
        mn, nm = nested_distance(M, N, p), nested_distance(N, M, p)
        nr, mr = nested_distance(N, R, p), nested_distance(M, R, p)
        worst = max(worst, abs(mn - nm), mr - (mn + nr), nested_distance(M, M, p))
    return worst <= 1e-9, worst, "symmetry, triangle slack, self-distance within 1e-9"


# -- 5 ------------------------------------------------------------------------


def geodesic_constant_speed():
    rng = np.random.default_rng(5)
    times = (0.0, 0.25, 0.5, 0.75, 1.0)
    worst = 0.0
    agree = True
    for _ in range(20):
        d = int(rng.integers(1, 4))
        M = gen.random_random_measure(rng, int(rng.integers(1, 4)), 3, d)
        N = gen.random_random_measure(rng, int(rng.integers(1, 4)), 3, d)
        cost, Pi = nested_wasserstein(M, N, 2.0)
        P = optimal_random_coupling(M, N, Pi, 2.0)
        total = math.sqrt(cost)
        curve = {t: outer_geodesic_from_random_coupling(P, t) for t in times}
        for t in times:
            agree &= random_measures_equal(curve[t], outer_geodesic_from_coupling(M, N, Pi, 2.0, t))
        for s in times:
            for t in times:
                err = abs(nested_distance(curve[s], curve[t], 2.0) - abs(t - s) * total)
                worst = max(worst, err / max(1.0, total))
    return worst <= 1e-6 and agree, worst, "relative speed error <= 1e-6, both constructions agree"


# -- 6 ------------------------------------------------------------------------


def benamou_brenier():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 4))
        M = gen.random_random_measure(rng, int(rng.integers(1, 5)), 4, d)
        N = gen.random_random_measure(rng, int(rng.integers(1, 5)), 4, d)
        rep = benamou_brenier_check(M, N, 2.0)
        worst = max(worst, abs(rep.gap) / max(1.0, rep.distance_p))
    return worst <= 1e-8, worst, "|action - WW_2^2| <= 1e-8 max(1, WW_2^2)"


# -- 7 ------------------------------------------------------------------------


def gradient_checks():
    rng = np.random.default_rng(7)
    fd_worst = 0.0
    chain_worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 4))
        F = gen.random_cylinder(rng, d)
        mu = gen.random_measure(rng, int(rng.integers(1, 6)), d)
        x = rng.normal(size=d)
        fd_worst = max(fd_worst, float(np.max(np.abs(wasserstein_gradient(F, x, mu) - gradient_by_mixing(F, x, mu)))))
        chain_worst = max(chain_worst, chain_rule_check(F, mu, gen.random_field(rng, d)))
    ok = fd_worst <= 1e-5 and chain_worst <= 1e-10
    return ok, max(fd_worst, chain_worst), f"finite differences {fd_worst:.1e} <= 1e-5, chain rule {chain_worst:.1e} <= 1e-10"


# -- 8 ------------------------------------------------------------------------


def cerm_convergence():
    rng = np.random.default_rng(8)
    d = 2
    init = gen.random_initial(rng, 3, 4, d)
    orders = []
    finest = 0.0
    for b in (ToBarycenter(1.0), Linear([[-1.0, 0.5], [-0.3, -0.2]])):
        F = gen.random_cylinder(rng, d, k=2)
        reps = [cerm_residual(evolve_ensemble(init, b, TimeGrid(0.0, 1.0, s)), b, F, estimate_order=False) for s in (256, 512, 1024)]
        orders += [observed_order(reps[0], reps[1]), observed_order(reps[1], reps[2])]
        finest = max(finest, reps[2].max_abs)
    ok = all(1.8 <= o <= 2.2 for o in orders) and finest <= 1e-4
    worst_order = max(orders, key=lambda o: abs(o - 2.0))
    return ok, worst_order, f"orders {[round(o, 3) for o in orders]} in [1.8, 2.2], residual at 1024 steps {finest:.1e} <= 1e-4"


# -- 9 ------------------------------------------------------------------------


def rk4_order():
    b = Linear([[-1.0]])
    x0 = ParticleConfiguration([[1.0]])
    errs = [abs(integrate_particles(x0, b, TimeGrid(0.0, 1.0, s), "rk4").states[-1, 0, 0] - math.exp(-1.0)) for s in (16, 32)]
    ratio = errs[0] / errs[1]
    return 12.0 <= ratio <= 20.0, ratio, "error ratio h : h/2 in [12, 20]"


# -- 10 -----------------------------------------------------------------------


def metric_speed_inequality():
    rng = np.random.default_rng(10)
    worst = -math.inf
    for _ in range(10):
        d = int(rng.integers(1, 3))
        b = gen.random_field(rng, d)
        grid = TimeGrid(0.0, 1.0, 40)
        ens = evolve_ensemble(gen.random_initial(rng, 3, 3, d), b, grid)
        slack = 0.05 * grid.h
        Ms = [ensemble_to_random_measure(ens, k) for k in range(grid.steps + 1)]
        for k in range(1, grid.steps):
            speed = nested_distance(Ms[k - 1], Ms[k + 1], 2.0) / (2 * grid.h)
            worst = max(worst, speed - lp_norm_against(b, Ms[k], grid.nodes[k], 2.0) - slack)
    return worst <= 0.0, worst, "metric speed - field norm - 0.05 h <= 0"


# -- 11 -----------------------------------------------------------------------


def gronwall_contraction():
    rng = np.random.default_rng(11)
    b = Linear(-np.eye(2))
    grid = TimeGrid(0.0, 1.0, 1024)
    worst = 0.0
    for uniform in (False, True, False):
        mu_a = gen.random_measure(rng, 4, 2, uniform=uniform)
        mu_b = gen.random_measure(rng, 3, 2, uniform=uniform)
        rep = gronwall_uniqueness_check(b, mu_a, mu_b, grid, 2.0)
        rel = np.abs(rep.distances - np.exp(-grid.nodes) * rep.distances[0]) / (np.exp(-grid.nodes) * rep.distances[0])
        worst = max(worst, float(rel.max()))
    mu = gen.random_measure(rng, 4, 2)
    same = gronwall_uniqueness_check(b, mu, DiscreteMeasure(mu.atoms[::-1], mu.weights[::-1]), grid, 2.0)
    coincide = float(same.distances.max())
    ok = worst <= 1e-3 and coincide <= 1e-9
    return ok, worst, f"relative deviation from exp(-t) W_0 <= 1e-3, identical initials {coincide:.1e} <= 1e-9"


# -- 12 -----------------------------------------------------------------------


def tangent_minimal_norm():
    rng = np.random.default_rng(12)
    d = 2
    M = gen.random_random_measure(rng, 3, 4, d)
    basis = [gen.random_cylinder(rng, d) for _ in range(5)]
    b = field_on_lift(gen.random_field(rng, d), M, 0.0)
    G = gradients_on_lift(basis, M)
    proj = tangent_projection(b, basis, M)
    ortho = max(abs(lifted_inner(b - proj, g, M)) for g in G)
    norm = math.sqrt(lifted_inner(proj, proj, M))
    shortfall = 0.0
    for _ in range(100):
        r = rng.normal(size=b.shape)
        r = r - tangent_projection(r, basis, M)
        shortfall = max(shortfall, norm - math.sqrt(lifted_inner(proj + r, proj + r, M)))
    ok = ortho <= 1e-8 and shortfall <= 1e-8
    return ok, max(ortho, shortfall), f"orthogonality {ortho:.1e} <= 1e-8, norm shortfall {shortfall:.1e} <= 1e-8"


# -- 13 -----------------------------------------------------------------------


def barycenter_pushforward():
    rng = np.random.default_rng(13)
    failures = 0
    for _ in range(100):
        d = int(rng.integers(1, 4))
        M = gen.random_random_measure(rng, int(rng.integers(1, 5)), 4, d)
        f = gen.random_affine(rng, d, int(rng.integers(1, 4)))
        if not measures_equal(barycenter(pushforward(M, f)), pushforward_measure(barycenter(M), f)):
            failures += 1
    return failures == 0, float(failures), "exact canonical equality on all 100 pairs"


# -- 14 -----------------------------------------------------------------------


def fixture_path(name: str) -> str:
    return str(resources.files("nestedot") / "fixtures" / name)


def cli_commands() -> list[list[str]]:
    f = fixture_path
    return [
        ["dist", "--a", f("M_dirac0.json"), "--b", f("M_dirac1.json"), "--p", "2"],
        ["dist", "--a", f("M.json"), "--b", f("N.json"), "--p", "2"],
        ["geodesic", "--a", f("M.json"), "--b", f("N.json"), "--p", "2", "--samples", "5"],
        ["barycenter", "--m", f("M.json")],
        ["bb-check", "--a", f("M.json"), "--b", f("N.json"), "--p", "2"],
        ["simulate", "--init", f("init.json"), "--field", f("field.json"), "--t1", "1", "--steps", "16", "--seed", "3"],
        ["verify-ce", "--ensemble", f("ensemble.json"), "--field", f("field.json"), "--cyl", f("cylinder.json")],
        ["verify-sps", "--ensemble", f("ensemble.json"), "--field", f("field.json")],
        ["gronwall", "--field", f("field.json"), "--a", f("mu_a.json"), "--b", f("mu_b.json"), "--t1", "1", "--steps", "64"],
    ]


def _run_captured(argv: list[str]) -> tuple[int, str]:
    from .cli import run

    buf = io.StringIO()
    with redirect_stdout(buf):
        code = run(argv)
    return code, buf.getvalue()


def _reparses(cmd: str, text: str) -> bool:
    from .dynamics import TrajectoryEnsemble

    obj = json.loads(text)
    if cmd == "geodesic":
        return all(RandomMeasure.from_dict(s["measure"]).size > 0 for s in obj)
    if cmd == "barycenter":
        return DiscreteMeasure.from_dict(obj).size > 0
    if cmd == "simulate":
        return len(TrajectoryEnsemble.from_dict(obj).paths) > 0
    return isinstance(obj, dict)


def cli_determinism():
    bad = 0
    for argv in cli_commands():
        c1, out1 = _run_captured(argv)
        c2, out2 = _run_captured(argv)
        if c1 != 0 or c2 != 0 or out1 != out2 or not _reparses(argv[0], out1):
            bad += 1
    return bad == 0, float(bad), "every command exits 0, byte-identical reruns, outputs re-parse"


CRITERIA: list[tuple[int, str, Callable, float | None]] = [
    (1, "OT oracle equivalence", ot_oracle_equivalence, 10.0),
    (2, "nested OT oracle equivalence", nested_oracle_equivalence, 30.0),
    (3, "random coupling identity", random_coupling_identity, None),
    (4, "nested metric axioms", nested_metric_axioms, None),
    (5, "geodesic constant speed", geodesic_constant_speed, None),
    (6, "Benamou-Brenier action", benamou_brenier, None),
    (7, "Wasserstein gradient and chain rule", gradient_checks, None),
    (8, "CERM residual convergence", cerm_convergence, None),
    (9, "RK4 order", rk4_order, None),
    (10, "metric speed inequality", metric_speed_inequality, None),
    (11, "Gronwall contraction", gronwall_contraction, None),
    (12, "tangent minimal norm", tangent_minimal_norm, None),
    (13, "barycenter push-forward", barycenter_pushforward, None),
    (14, "CLI determinism and round-trip", cli_determinism, None),
]


def run_criterion(number: int) -> Criterion:
    num, name, fn, budget = CRITERIA[number - 1]
    return _timed(num, name, fn, budget)


def run_all(numbers=None) -> list[Criterion]:
    numbers = [c[0] for c in CRITERIA] if numbers is None else numbers
    return [run_criterion(n) for n in numbers]
