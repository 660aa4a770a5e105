"""Command-line entry point.

Exit codes: 0 success, 2 tolerance breach in a verify command, 3 input error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Any

import numpy as np

from . import __version__
from .cylinder import cylinder_from_dict
from .dynamics import TimeGrid, TrajectoryEnsemble, evolve_ensemble
from .errors import NestedOTError, ToleranceBreach
from .fields import field_from_dict
from .geodesics import outer_geodesic_from_random_coupling
from .measures import DiscreteMeasure, ParticleConfiguration, RandomMeasure, barycenter
from .nested import nested_wasserstein, optimal_random_coupling
from .ot_core import wasserstein
from .verify import benamou_brenier_check, cerm_residual, gronwall_uniqueness_check, sps_residual

EXIT_OK, EXIT_BREACH, EXIT_INPUT = 0, 2, 3


class InputError(Exception):
    pass


def _clean(obj: Any) -> Any:
    # strict JSON has no NaN/inf
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _emit(obj: Any) -> None:
    sys.stdout.write(json.dumps(_clean(obj), allow_nan=False) + "\n")


def _load(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def _load_measure(path: str) -> DiscreteMeasure | RandomMeasure:
    d = _load(path)
    if not isinstance(d, dict):
        raise InputError(f"{path}: expected a JSON object")
    if "components" in d:
        return RandomMeasure.from_dict(d)
    return DiscreteMeasure.from_dict(d)


def _load_random(path: str) -> RandomMeasure:
    m = _load_measure(path)
    return RandomMeasure.dirac(m) if isinstance(m, DiscreteMeasure) else m


def _load_discrete(path: str) -> DiscreteMeasure:
    m = _load_measure(path)
    if isinstance(m, RandomMeasure):
        raise InputError(f"{path}: expected a DiscreteMeasure")
    return m


def _load_initial(path: str) -> list[tuple[float, ParticleConfiguration]]:
    d = _load(path)
    if isinstance(d, dict) and "configurations" in d:
        dim = d.get("dim")
        return [(float(c["weight"]), ParticleConfiguration(c["points"], dim)) for c in d["configurations"]]
    if isinstance(d, dict) and "components" in d:
        M = RandomMeasure.from_dict(d)
        return [(float(w), ParticleConfiguration(c.atoms)) for w, c in zip(M.outer_weights, M.components)]
    raise InputError(f"{path}: expected initial configurations or a RandomMeasure")


def _csv_or_json(args, report) -> None:
    if getattr(args, "csv", False):
        sys.stdout.write(report.to_csv())
    else:
        _emit(report.to_dict())


# -- subcommands ---------------------------------------------------------------


def cmd_dist(args) -> int:
    a, b = _load_measure(args.a), _load_measure(args.b)
    if isinstance(a, DiscreteMeasure) and isinstance(b, DiscreteMeasure):
        res = wasserstein(a, b, args.p)
        wpp, payload = res.cost, res.to_dict()
    else:
        A = RandomMeasure.dirac(a) if isinstance(a, DiscreteMeasure) else a
        B = RandomMeasure.dirac(b) if isinstance(b, DiscreteMeasure) else b
        wpp, Pi = nested_wasserstein(A, B, args.p)
        payload = Pi.to_dict()
    if args.emit_coupling:
        with open(args.emit_coupling, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(_clean(payload)) + "\n")
    _emit({"wp": wpp ** (1.0 / args.p), "wpp": wpp})
    return EXIT_OK


def cmd_geodesic(args) -> int:
    if args.samples < 2:
        raise InputError("--samples must be at least 2")
    M, N = _load_random(args.a), _load_random(args.b)
    _, Pi = nested_wasserstein(M, N, args.p)
    P = optimal_random_coupling(M, N, Pi, args.p)
    out = []
    for j in range(args.samples):
        t = j / (args.samples - 1)
        out.append({"t": t, "measure": outer_geodesic_from_random_coupling(P, t).to_dict()})
    _emit(out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    init = _load_initial(args.init)
    b = field_from_dict(_load(args.field))
    ens = evolve_ensemble(init, b, TimeGrid(args.t0, args.t1, args.steps), args.scheme, args.seed)
    if args.csv:
        sys.stdout.write(ens.to_csv())
    else:
        _emit(ens.to_dict())
    return EXIT_OK


def cmd_verify_ce(args) -> int:
    ens = TrajectoryEnsemble.from_dict(_load(args.ensemble))
    b = field_from_dict(_load(args.field))
    F = cylinder_from_dict(_load(args.cyl))
    rep = cerm_residual(ens, b, F, estimate_order=not args.no_order)
    _csv_or_json(args, rep)
    return EXIT_OK if rep.max_abs <= args.tol else EXIT_BREACH


def cmd_verify_sps(args) -> int:
    ens = TrajectoryEnsemble.from_dict(_load(args.ensemble))
    b = field_from_dict(_load(args.field))
    per_path = [sps_residual(pth, b) for pth in ens.paths]
    worst = max(per_path)
    if args.csv:
        sys.stdout.write("path,residual\n" + "".join(f"{i},{r!r}\n" for i, r in enumerate(per_path)))
    else:
        _emit({"residual": worst, "per_path": per_path, "h": ens.grid.h})
    return EXIT_OK if worst <= args.tol else EXIT_BREACH


def cmd_bb_check(args) -> int:
    M, N = _load_random(args.a), _load_random(args.b)
    rep = benamou_brenier_check(M, N, args.p, args.time_steps)
    _emit(rep.to_dict())
    return EXIT_OK if abs(rep.gap) <= args.tol * max(1.0, rep.distance_p) else EXIT_BREACH


def cmd_barycenter(args) -> int:
    _emit(barycenter(_load_random(args.m)).to_dict())
    return EXIT_OK


def cmd_gronwall(args) -> int:
    b = field_from_dict(_load(args.field))
    mu_a, mu_b = _load_discrete(args.a), _load_discrete(args.b)
    rep = gronwall_uniqueness_check(b, mu_a, mu_b, TimeGrid(args.t0, args.t1, args.steps), args.p, args.scheme, strict=False)
    _csv_or_json(args, rep)
    return EXIT_OK if rep.ok else EXIT_BREACH


def cmd_selftest(args) -> int:
    from .acceptance import run_all

    results = run_all(args.only or None)
    for c in results:
        print(c.line())
    passed = sum(c.passed for c in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_BREACH


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nestedot", description="Wasserstein-on-Wasserstein toolkit")
    ap.add_argument("--version", action="store_true", help="print the version to stderr and exit")
    sub = ap.add_subparsers(dest="command")

    s = sub.add_parser("dist", help="W_p between measures or WW_p between random measures")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--emit-coupling")
    s.set_defaults(func=cmd_dist)

    s = sub.add_parser("geodesic", help="samples of the outer geodesic")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--samples", type=int, default=5)
    s.set_defaults(func=cmd_geodesic)

    s = sub.add_parser("simulate", help="integrate an ensemble of particle systems")
    s.add_argument("--init", required=True)
    s.add_argument("--field", required=True)
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--t1", type=float, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--scheme", choices=["euler", "rk4"], default="rk4")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--csv", action="store_true")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("verify-ce", help="continuity-equation residual against a cylinder function")
    s.add_argument("--ensemble", required=True)
    s.add_argument("--field", required=True)
    s.add_argument("--cyl", required=True)
    s.add_argument("--tol", type=float, default=1e-3)
    s.add_argument("--no-order", action="store_true")
    s.add_argument("--csv", action="store_true")
    s.set_defaults(func=cmd_verify_ce)

    s = sub.add_parser("verify-sps", help="superposition residual of every path")
    s.add_argument("--ensemble", required=True)
    s.add_argument("--field", required=True)
    s.add_argument("--tol", type=float, default=1e-3)
    s.add_argument("--csv", action="store_true")
    s.set_defaults(func=cmd_verify_sps)

    s = sub.add_parser("bb-check", help="Benamou-Brenier action vs WW_p^p")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--time-steps", type=int, default=16)
    s.add_argument("--tol", type=float, default=1e-8)
    s.set_defaults(func=cmd_bb_check)

    s = sub.add_parser("barycenter", help="mean measure of a random measure")
    s.add_argument("--m", required=True)
    s.set_defaults(func=cmd_barycenter)

    s = sub.add_parser("gronwall", help="Gronwall contraction check for two initial measures")
    s.add_argument("--field", required=True)
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--t0", type=float, default=0.0)
    s.add_argument("--t1", type=float, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--p", type=float, default=2.0)
    s.add_argument("--scheme", choices=["euler", "rk4"], default="rk4")
    s.add_argument("--csv", action="store_true")
    s.set_defaults(func=cmd_gronwall)

    s = sub.add_parser("selftest", help="run the acceptance criteria")
    s.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    s.set_defaults(func=cmd_selftest)
    return ap


def run(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.version:
        print(f"nestedot {__version__}", file=sys.stderr)
        return EXIT_OK
    if args.command is None:
        ap.print_help(sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except ToleranceBreach as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BREACH
    except (InputError, NestedOTError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
