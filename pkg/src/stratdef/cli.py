"""Command-line entry point.

Subcommands: transform, fm-elim, verify-blowup, shatter, growth, learn.
Exit codes: 0 success, 1 verification failure, 2 usage error.

Artifacts are written atomically (temp file + rename) and are byte-identical
across replays with the same config and seed: the resolved config and the
toolkit version are embedded in every artifact, while wall-clock timestamps
go to a separate sidecar file (<out>.meta.json).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import capacity, constructions, families, learn, solve, transform
from . import formula as fm


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Serialization


def _jsonable(v):
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, float):
        return v
    if isinstance(v, dict):
        return {_key(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (str, int, bool)) or v is None:
        return v
    return str(v)


def _key(k):
    if isinstance(k, tuple):
        return ",".join(str(x) for x in k)
    return str(k)


def _atomic_write(path: str, data: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=target.name,
                               suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(data)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_artifact(path: str, config: dict, result) -> None:
    doc = {"version": __version__, "config": _jsonable(config),
           "result": _jsonable(result)}
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    meta = {"written_at_unix": time.time()}
    _atomic_write(str(path) + ".meta.json", json.dumps(meta) + "\n")


def write_csv(path: str, header: list, rows: list, config: dict) -> None:
    lines = ["# version=" + __version__,
             "# config=" + json.dumps(_jsonable(config), sort_keys=True),
             ",".join(header)]
    for row in rows:
        lines.append(",".join(_format_cell(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")
    meta = {"written_at_unix": time.time()}
    _atomic_write(str(path) + ".meta.json", json.dumps(meta) + "\n")


def _format_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    return str(v)


# ---------------------------------------------------------------------------
# Subcommands


def _load_formula(spec: str) -> fm.Formula:
    """A registry spec string ('halfspace:l=2'), or a path to a file holding
    one s-expression formula."""
    path = Path(spec)
    if path.exists():
        return fm.parse(path.read_text())
    name = spec.partition(":")[0]
    try:
        return families.make_family(spec).formula()
    except families.FamilyError:
        pass
    try:
        return families.make_neighborhood(spec).formula()
    except families.FamilyError:
        pass
    raise UsageError(f"{spec!r} is neither a readable file nor a known "
                     "family/neighborhood spec")


def cmd_transform(args) -> int:
    phi_h = _load_formula(args.hypothesis)
    phi_n = _load_formula(args.neighborhood)
    spec = transform.strategic_transform(phi_h, phi_n,
                                         input_dim=args.input_dim)
    report = transform.complexity_report(spec)
    result = {"formula": str(spec.transformed),
              "formula_json": fm.formula_to_json(spec.transformed),
              "report": report}
    config = {"command": "transform", "hypothesis": args.hypothesis,
              "neighborhood": args.neighborhood, "input_dim": args.input_dim,
              "seed": args.seed, "precision_bits": args.precision_bits}
    write_artifact(args.out, config, result)
    print(f"transform: F_out={report['transformed']['format']} "
          f"D_out={report['transformed']['degree']} -> {args.out}")
    return 0


def _load_system(path: str) -> solve.LinearSystem:
    doc = json.loads(Path(path).read_text())
    rows = [(c["coeffs"], c["rel"], c["rhs"]) for c in doc["constraints"]]
    return solve.LinearSystem.make(
        doc["variables"],
        [([Fraction(v) for v in co], rel, Fraction(rhs))
         for co, rel, rhs in rows])


def cmd_fm_elim(args) -> int:
    sys_in = _load_system(args.infile)
    drop = [v.strip() for v in args.drop.split(",") if v.strip()]
    out = solve.fm_eliminate(sys_in, drop)
    result = {
        "variables": list(out.variables),
        "constraints": [{"coeffs": list(c.coeffs), "rel": c.rel,
                         "rhs": c.rhs} for c in out.constraints],
        "trivially_infeasible": out.is_trivially_infeasible(),
    }
    config = {"command": "fm-elim", "in": args.infile, "drop": drop,
              "seed": args.seed, "precision_bits": args.precision_bits}
    write_artifact(args.out, config, result)
    print(f"fm-elim: {len(sys_in.constraints)} -> {len(out.constraints)} "
          f"constraints over {list(out.variables)} -> {args.out}")
    return 0


def _build_construction(kind: str, args) -> constructions.ConstructionInstance:
    if kind == "fixed":
        radii = None
        if args.s:
            radii = [Fraction(v) for v in args.s.split(",")]
        return constructions.build_fixed_blowup(
            args.n, Fraction(args.r), Fraction(args.rp), radii=radii)
    if kind == "all-radii":
        if not args.s:
            raise UsageError("all-radii needs --s")
        return constructions.build_all_radii(args.t, Fraction(args.s),
                                             args.n, cert_cap=args.cert_cap)
    if kind == "partition":
        return constructions.build_partition_pathology(args.n)
    if kind == "frac":
        return constructions.build_frac_construction(args.n,
                                                     Fraction(args.r))
    raise UsageError(f"unknown construction {kind!r}")


def _instance_result(inst: constructions.ConstructionInstance) -> dict:
    return {
        "construction_id": inst.construction_id,
        "n": inst.n,
        "params": inst.params,
        "anchors": inst.anchors,
        "supports": {k: list(v) for k, v in inst.supports.items()},
        "certificates": [{"name": c.name, "passed": c.passed,
                          "detail": c.detail} for c in inst.certificates],
        "passed": inst.passed(),
        "metadata": inst.metadata,
    }


def cmd_verify_blowup(args) -> int:
    inst = _build_construction(args.construction, args)
    config = {"command": "verify-blowup", "construction": args.construction,
              "n": args.n, "r": args.r, "rp": args.rp, "s": args.s,
              "t": args.t, "cert_cap": args.cert_cap, "seed": args.seed,
              "precision_bits": args.precision_bits}
    write_artifact(args.out, config, _instance_result(inst))
    print(inst.summary())
    return 0 if inst.passed() else 1


def cmd_shatter(args) -> int:
    doc = json.loads(Path(args.instance).read_text())
    cfg = doc.get("config", {})
    kind = cfg.get("construction")
    if kind is None:
        raise UsageError("instance file lacks a construction config")
    ns = argparse.Namespace(
        construction=kind, n=cfg.get("n"), r=cfg.get("r"),
        rp=cfg.get("rp"), s=cfg.get("s"), t=cfg.get("t"),
        cert_cap=cfg.get("cert_cap", 10))
    inst = _build_construction(kind, ns)
    stored = doc.get("result", {})
    match = stored.get("passed") == inst.passed()
    print(inst.summary())
    print(f"shatter: stored verdict "
          f"{'matches' if match else 'DIFFERS FROM'} re-verification")
    return 0 if inst.passed() and match else 1


def cmd_growth(args) -> int:
    family = families.make_family(args.family)
    neigh = families.make_neighborhood(args.neighborhood) \
        if args.neighborhood else families.identity(family.input_dim)
    if neigh.dim != family.input_dim:
        raise UsageError("family and neighborhood dimensions differ")
    m_values = [int(v) for v in args.m.split(",")]
    box = family.param_box

    def label_fn(params, X):
        return tuple(bool(b) for b in
                     families.batch_strategic_labels(family, neigh, params,
                                                     X))

    def point_sampler(m, rng):
        return rng.uniform(-1.0, 1.0, size=(m, family.input_dim))

    def param_sampler(rng):
        return [rng.uniform(*box[i % len(box)])
                for i in range(family.param_dim)]

    report = capacity.growth_series(label_fn, point_sampler, param_sampler,
                                    m_values, args.trials, seed=args.seed,
                                    param_draws=args.param_draws)
    config = {"command": "growth", "family": args.family,
              "neighborhood": args.neighborhood, "m": m_values,
              "trials": args.trials, "param_draws": args.param_draws,
              "seed": args.seed, "precision_bits": args.precision_bits}
    rows = [(m, c) for m, c in zip(report.m_values, report.counts)]
    write_csv(args.csv, ["m", "distinct_traces"], rows, config)
    slope = "n/a" if report.slope is None else f"{report.slope:.3f}"
    print(f"growth: counts={list(report.counts)} log-log slope={slope} "
          f"-> {args.csv}")
    return 0


def cmd_learn(args) -> int:
    family = families.make_family(args.family)
    neigh = families.make_neighborhood(args.neighborhood) \
        if args.neighborhood else families.identity(family.input_dim)
    if neigh.dim != family.input_dim:
        raise UsageError("family and neighborhood dimensions differ")
    eps_grid = [float(v) for v in args.eps.split(",")]
    rng = np.random.default_rng([args.seed, 0xA5])
    box = family.param_box
    target = [rng.uniform(*box[i % len(box)])
              for i in range(family.param_dim)]
    report = learn.sample_complexity_sweep(
        family, neigh, target, eps_grid, args.delta, args.trials, args.seed,
        budget=args.budget)
    config = {"command": "learn", "family": args.family,
              "neighborhood": args.neighborhood, "eps": eps_grid,
              "delta": args.delta, "trials": args.trials,
              "budget": args.budget, "seed": args.seed,
              "precision_bits": args.precision_bits}
    rows = [(r.eps, r.m_hat, r.product, r.success_rate, r.zero_error_rate)
            for r in report.rows]
    write_csv(args.csv,
              ["eps", "m_hat", "m_hat_times_eps", "success_rate",
               "zero_empirical_error_rate"], rows, config)
    print(f"learn: m_hat={[r.m_hat for r in report.rows]} "
          f"slope={report.slope} -> {args.csv}")
    return 0


# ---------------------------------------------------------------------------
# Dispatcher


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="stratdef",
        description="Definability toolkit for strategic classification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--precision-bits", type=int, default=4096,
                   help="cap for certified interval refinement")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="worker pool size (all work runs through it)")
    sub = p.add_subparsers(dest="command")

    t = sub.add_parser("transform", help="strategic transform of a "
                       "hypothesis and neighborhood formula")
    t.add_argument("--hypothesis", required=True)
    t.add_argument("--neighborhood", required=True)
    t.add_argument("--input-dim", type=int, default=None)
    t.add_argument("--out", required=True)
    t.set_defaults(fn=cmd_transform)

    e = sub.add_parser("fm-elim", help="Fourier-Motzkin projection of a "
                       "linear system")
    e.add_argument("--in", dest="infile", required=True)
    e.add_argument("--drop", required=True,
                   help="comma-separated variables to eliminate")
    e.add_argument("--out", required=True)
    e.set_defaults(fn=cmd_fm_elim)

    v = sub.add_parser("verify-blowup", help="build and certify a "
                       "lower-bound construction")
    v.add_argument("--construction", required=True,
                   choices=sorted(constructions.BUILDERS))
    v.add_argument("--n", type=int, default=3)
    v.add_argument("--r", default="1")
    v.add_argument("--rp", default="1/2")
    v.add_argument("--s", default=None,
                   help="radius (all-radii) or comma list (fixed)")
    v.add_argument("--t", type=int, default=260,
                   help="all-radii: number of enumerated blocks")
    v.add_argument("--cert-cap", type=int, default=10)
    v.add_argument("--out", default="cert.json")
    v.set_defaults(fn=cmd_verify_blowup)

    s = sub.add_parser("shatter", help="re-verify a stored certificate")
    s.add_argument("--instance", required=True)
    s.set_defaults(fn=cmd_shatter)

    g = sub.add_parser("growth", help="sampled growth-function estimates")
    g.add_argument("--family", required=True)
    g.add_argument("--neighborhood", default=None)
    g.add_argument("--m", default="8,16,32,64")
    g.add_argument("--trials", type=int, default=3)
    g.add_argument("--param-draws", type=int, default=2000)
    g.add_argument("--csv", required=True)
    g.set_defaults(fn=cmd_growth)

    l = sub.add_parser("learn", help="sample-complexity sweep for "
                       "approximate strategic ERM")
    l.add_argument("--family", required=True)
    l.add_argument("--neighborhood", default=None)
    l.add_argument("--eps", default="0.2,0.1,0.05")
    l.add_argument("--delta", type=float, default=0.1)
    l.add_argument("--trials", type=int, default=20)
    l.add_argument("--budget", type=int, default=400)
    l.add_argument("--csv", required=True)
    l.set_defaults(fn=cmd_learn)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "fn", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.fn(args)
    except (UsageError, families.FamilyError, fm.FormulaError,
            FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (constructions.ConstructionError, solve.SolveError,
            transform.TransformError, learn.LearnError,
            capacity.CapacityError) as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
