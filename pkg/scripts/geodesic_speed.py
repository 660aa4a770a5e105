"""Sample an outer geodesic between two random measures and report its metric speed.

On a constant-speed geodesic WW_p(M_s, M_t) = |t - s| WW_p(M_0, M_1) for every pair of samples.
"""

import argparse

import numpy as np

from nestedot.generators import random_random_measure
from nestedot.geodesics import GeodesicCurve
from nestedot.nested import nested_distance


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--outer", type=int, default=3)
    ap.add_argument("--inner", type=int, default=4)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--samples", type=int, default=6)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    M = random_random_measure(rng, args.outer, args.inner, args.dim)
    N = random_random_measure(rng, args.outer, args.inner, args.dim)
    total = nested_distance(M, N, args.p)
    curve = GeodesicCurve.between(M, N, args.p)
    ts = np.linspace(0.0, 1.0, args.samples)
    pts = [curve.sample(t) for t in ts]

    print(f"WW_{args.p:g}(M, N) = {total:.12f}")
    print(f"{'s':>6} {'t':>6} {'WW(M_s, M_t)':>16} {'|t-s| WW':>16} {'rel err':>10}")
    worst = 0.0
    for i in range(len(ts)):
        for j in range(i + 1, len(ts)):
            d = nested_distance(pts[i], pts[j], args.p)
            ref = (ts[j] - ts[i]) * total
            rel = abs(d - ref) / ref if ref > 0 else abs(d)
            worst = max(worst, rel)
            print(f"{ts[i]:6.3f} {ts[j]:6.3f} {d:16.12f} {ref:16.12f} {rel:10.2e}")
    print(f"worst relative error {worst:.2e}")


if __name__ == "__main__":
    main()
