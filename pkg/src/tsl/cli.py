"""Command-line entry point: run <config>, check <snapshot|manifest>,
distance <manifest> <manifest>, sample <gaussian-spec>.

Exit status is 0 iff every enabled check passes.  TSL_THREADS caps the
worker count for ensemble-parallel work (default 1, fully sequential).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .diagnostics import (build_probe_family, check_apriori_2d,
                          check_apriori_3d, check_galerkin_bounds,
                          check_y_membership, wstar_distance)
from .dynamics import Forcing, energy_report
from .measures import GaussianSpec, sample_gaussian
from .scenarios import ExperimentConfig, parse_field, parse_forcing, run_scenario
from .snapshots import load_ensemble, load_trajectory, save_measure
from .spectral import make_grid

_CHECK_FAMILIES = ("energy", "apriori2d", "apriori3d", "galerkin",
                   "y2d", "y3d", "ygal")


def _load_members(path):
    if path.endswith(".json"):
        rho = load_ensemble(path)
        return rho.members
    return [load_trajectory(path)]


def _run_check(args) -> int:
    members = _load_members(args.target)
    grid = members[0].grid
    forcing = Forcing.zero(grid)
    if args.forcing:
        with open(args.forcing) as fh:
            forcing = parse_forcing(grid, json.load(fh))
    reports = []
    for traj in members:
        nu = args.nu if args.nu is not None else traj.cfg.nu
        if args.family == "energy":
            rep = energy_report(traj, forcing, tolerance=args.tol)
        elif args.family == "apriori2d":
            rep = check_apriori_2d(traj, forcing, nu, args.nu0, args.r, args.c, args.tol)
        elif args.family == "apriori3d":
            rep = check_apriori_3d(traj, forcing, nu, args.nu0, args.c, tolerance=args.tol)
        elif args.family == "galerkin":
            rep = check_galerkin_bounds(traj, forcing, nu, args.c, args.tol)
        else:
            variant = {"y2d": "2d", "y3d": "3d", "ygal": "galerkin"}[args.family]
            if args.R is None:
                raise SystemExit("membership checks need --R")
            rep = check_y_membership(traj, forcing, args.R, args.nu0, variant,
                                     r=args.r if variant == "2d" else None,
                                     nu=nu, c=args.c, tolerance=args.tol)
        reports.append(rep)
    ok = all(r.verdict for r in reports)
    print(json.dumps({
        "family": args.family, "members": len(reports),
        "min_margin": min(r.min_margin for r in reports),
        "verdict": bool(ok),
        "reports": [json.loads(r.to_json()) for r in reports],
    }, sort_keys=True))
    return 0 if ok else 1


def _run_distance(args) -> int:
    rho1 = load_ensemble(args.manifest1)
    rho2 = load_ensemble(args.manifest2)
    with open(args.probes) as fh:
        spec = json.load(fh)
    family = build_probe_family(rho1.grid, spec.get("times", [rho1.times[-1]]),
                                int(spec.get("count", 8)), int(spec.get("seed", 0)))
    d = wstar_distance(rho1, rho2, family)
    print(json.dumps({"distance": d, "probes": len(family)}, sort_keys=True))
    return 0 if np.isfinite(d) else 1


def _run_sample(args) -> int:
    with open(args.spec) as fh:
        spec = json.load(fh)
    g = spec["grid"]
    grid = make_grid(int(g["dim"]), g["lengths"], int(g["modes_per_dim"]))
    mean = parse_field(grid, spec["mean"])
    gspec = GaussianSpec.isotropic(mean, float(spec["sigma"]),
                                   float(spec.get("sigma_max_k2", grid.lambda1 * 2)))
    mu = sample_gaussian(gspec, args.n, args.seed)
    path = save_measure(args.out, mu, provenance={"seed": args.seed, "n": args.n,
                                                  "spec": spec})
    print(json.dumps({"manifest": path, "atoms": mu.n_atoms}, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tsl",
        description="Spectral ensemble simulator and inequality diagnostics "
                    "for periodic incompressible flow.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config, emit CSV/JSON reports")
    p_run.add_argument("config")

    p_check = sub.add_parser("check", help="run one bound family on a snapshot or manifest")
    p_check.add_argument("target")
    p_check.add_argument("--family", required=True, choices=_CHECK_FAMILIES)
    p_check.add_argument("--c", type=float, default=1.0)
    p_check.add_argument("--nu0", type=float, default=1.0)
    p_check.add_argument("--R", type=float, default=None)
    p_check.add_argument("--r", type=float, default=2.0)
    p_check.add_argument("--nu", type=float, default=None)
    p_check.add_argument("--tol", type=float, default=1e-6,
                         help="margin tolerance; the default allows for the "
                              "single-precision snapshot storage")
    p_check.add_argument("--forcing", default=None,
                         help="JSON forcing spec (default: zero)")

    p_dist = sub.add_parser("distance", help="probe pseudometric between two ensembles")
    p_dist.add_argument("manifest1")
    p_dist.add_argument("manifest2")
    p_dist.add_argument("--probes", required=True, help="JSON probe-family spec")

    p_sample = sub.add_parser("sample", help="draw a Gaussian particle measure")
    p_sample.add_argument("spec", help="JSON sampler spec (grid, mean, sigma)")
    p_sample.add_argument("--n", type=int, required=True)
    p_sample.add_argument("--seed", type=int, required=True)
    p_sample.add_argument("--out", default="measure_out")

    args = parser.parse_args(argv)
    if args.command == "run":
        summary = run_scenario(ExperimentConfig.from_file(args.config))
        print(json.dumps({"pass": summary["pass"],
                          "output_dir": summary["config"].get("output_dir", "out")},
                         sort_keys=True))
        return 0 if summary["pass"] else 1
    if args.command == "check":
        return _run_check(args)
    if args.command == "distance":
        return _run_distance(args)
    if args.command == "sample":
        return _run_sample(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
