"""Convergence of the continuity-equation residual for a particle ensemble under grid refinement.

The residual is a central difference in time, so it should shrink by about 4 per halving of h.
"""

import argparse

import numpy as np

from nestedot.dynamics import TimeGrid, evolve_ensemble
from nestedot.generators import random_cylinder, random_field, random_initial
from nestedot.verify import cerm_residual, observed_order


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--paths", type=int, default=4)
    ap.add_argument("--particles", type=int, default=5)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--levels", type=int, nargs="+", default=[32, 64, 128, 256, 512, 1024])
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    b = random_field(rng, args.dim)
    F = random_cylinder(rng, args.dim, k=2)
    init = random_initial(rng, args.paths, args.particles, args.dim)

    prev = None
    print(f"{'steps':>6} {'max |residual|':>16} {'order':>7}")
    for steps in args.levels:
        ens = evolve_ensemble(init, b, TimeGrid(0.0, 1.0, steps))
        rep = cerm_residual(ens, b, F, estimate_order=False)
        order = "" if prev is None else f"{observed_order(prev, rep):7.3f}"
        print(f"{steps:6d} {rep.max_abs:16.6e} {order:>7}")
        prev = rep


if __name__ == "__main__":
    main()
