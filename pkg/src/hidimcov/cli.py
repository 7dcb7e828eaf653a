"""hidimcov command line.

Every subcommand writes its artifacts atomically and prints one JSON line
summarizing the run, including the effective configuration. Exit codes: 0 on
success, 1 on a computation error (or failed mc assertions), 2 on usage errors.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import asymvar, io, limit, mc
from .covest import frobenius_star, multi_d_path, sample_cov, trace_star
from .linalg import FactorizationError
from .lrvest import KernelSpec, resolve_kernel, trace_ci
from .model import simulate, verify_assumption_a
from .shrink import shrink_estimate, w_star_oracle
from .weights import (
    FamilyNotFound, WeightPairSet, all_pairs, coherence, from_json,
    near_orthogonal_family, sparse_l1, to_json, unit_pairs, unit_vector,
)


class UsageError(Exception):
    pass


def _emit(summary: dict):
    print(json.dumps(summary, sort_keys=True, default=io._default))


def _scheme_args(args):
    """Scheme document from --scheme with command-line overrides applied."""
    doc = io.read_json(args.scheme)
    for key in ("d", "J", "theta", "kind"):
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    inn = dict(doc.get("innovations") or {})
    if getattr(args, "family", None):
        inn["family"] = args.family
    if getattr(args, "sigma_sq", None) is not None:
        inn["sigma_sq"] = args.sigma_sq
    doc["innovations"] = inn
    try:
        scheme, innov = io.load_scheme(doc)
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"invalid scheme {args.scheme}: {exc}")
    return scheme, innov, io.scheme_document(scheme, innov)


def _kernel(args, n: int) -> KernelSpec:
    if args.bandwidth == "auto":
        return resolve_kernel(args.kernel, n)
    try:
        m = int(args.bandwidth)
    except ValueError:
        raise UsageError(f"--bandwidth must be 'auto' or an integer, got {args.bandwidth!r}")
    return resolve_kernel(KernelSpec(args.kernel, m), n)


def _pairs(args, d: int) -> WeightPairSet:
    """--weights file: consecutive vectors form pairs, or all pairs with --all-pairs."""
    if not getattr(args, "weights", None):
        return unit_pairs(d)
    vecs = from_json(io.read_json(args.weights))
    if any(v.dim != d for v in vecs):
        raise UsageError(f"weight vectors must have dimension {d}")
    if args.all_pairs:
        return all_pairs(vecs)
    if len(vecs) == 1:
        return WeightPairSet(((vecs[0], vecs[0]),))
    if len(vecs) % 2:
        raise UsageError("--weights needs an even number of vectors (v1, w1, v2, w2, ...)")
    return WeightPairSet(tuple((vecs[k], vecs[k + 1]) for k in range(0, len(vecs), 2)))


# ---------------------------------------------------------------- subcommands

def cmd_simulate(args):
    scheme, innov, doc = _scheme_args(args)
    panel = simulate(scheme, innov, args.n, args.seed)
    io.save_panel(panel, args.out)
    check = verify_assumption_a(scheme) if scheme.J >= 2 else None
    _emit({
        "command": "simulate", "out": str(args.out), "n": panel.n, "d": panel.d,
        "seed": args.seed, "scheme_digest": scheme.digest(), "assumption_a": check,
        "config": doc,
    })


def cmd_cov(args):
    panel = io.load_panel(args.panel)
    est = sample_cov(panel)
    if args.out:
        io.atomic_write(args.out, io.matrix_to_csv(est.matrix))
    summary = {
        "command": "cov", "panel": str(args.panel), "n": panel.n, "d": panel.d,
        "trace_star": trace_star(est.matrix), "frobenius_star": frobenius_star(est.matrix),
        "out": args.out,
    }
    if args.path_out:
        if not args.sigma:
            raise UsageError("--path-out needs --sigma")
        Sigma = io.load_matrix(args.sigma)
        path = multi_d_path(panel, Sigma, _pairs(args, panel.d))
        io.atomic_write(args.path_out, io.path_to_csv(path))
        summary["path_out"] = args.path_out
        summary["pairs"] = path.L
    summary["config"] = {"sigma": args.sigma, "weights": args.weights, "all_pairs": args.all_pairs}
    _emit(summary)


def cmd_asymvar(args):
    scheme, innov, doc = _scheme_args(args)
    pairs = _pairs(args, scheme.d)
    kern = asymvar.beta_matrix(scheme, innov, pairs, args.L_max)
    summary = {"command": "asymvar", "pairs": pairs.L, "alpha_sq": float(kern.beta[0, 0])}
    if not args.weights:
        summary["sigma_tr_sq"] = asymvar.sigma_tr_sq(kern)
    if args.out:
        io.atomic_write(args.out, io.matrix_to_csv(kern.beta))
        sidecar = {
            "sigma_sq": innov.sigma_sq, "gamma4": innov.gamma4, "L_max": args.L_max,
            "scheme_digest": scheme.digest(), "pairs": pairs.L,
            "pair_digests": [_pair_digest(v, w) for v, w in pairs.pairs],
        }
        io.atomic_write(str(args.out) + ".json", io.dumps(sidecar))
        summary["out"] = args.out
    summary["config"] = doc
    _emit(summary)


def _pair_digest(v, w) -> str:
    h = hashlib.sha256(np.ascontiguousarray(v.coords).tobytes())
    h.update(np.ascontiguousarray(w.coords).tobytes())
    return h.hexdigest()[:16]


def cmd_trace_ci(args):
    panel = io.load_panel(args.panel)
    ci = trace_ci(panel, _kernel(args, panel.n), args.level)
    out = ci.to_dict()
    if args.out:
        io.atomic_write(args.out, io.dumps(out))
    _emit({"command": "trace-ci", **out, "out": args.out,
           "config": {"kernel": args.kernel, "bandwidth": args.bandwidth, "level": args.level}})


def _weight_choice(text: str):
    if text == "estimate":
        return "estimate", None
    kind, _, rest = text.partition(":")
    if kind == "fixed" and rest:
        try:
            W = float(rest)
        except ValueError:
            W = None
        if W is not None and 0.0 <= W <= 1.0:
            return W, None
    if kind == "oracle" and rest:
        return "oracle", rest
    raise UsageError(f"--weight must be estimate, fixed:<w> or oracle:<config>, got {text!r}")


def cmd_shrink(args):
    panel = io.load_panel(args.panel)
    weight, oracle_path = _weight_choice(args.weight)
    oracle = None
    if oracle_path:
        try:
            scheme, innov = io.load_scheme(oracle_path)
        except (ValueError, TypeError, KeyError) as exc:
            raise UsageError(f"invalid oracle scheme {oracle_path}: {exc}")
        if scheme.d != panel.d:
            raise UsageError(f"oracle scheme has d={scheme.d}, panel has d={panel.d}")
        oracle = w_star_oracle(scheme, innov, panel.n)
    kernel = _kernel(args, panel.n)
    res = shrink_estimate(panel, kernel, weight, oracle)
    diag = res.diagnostics()
    if args.out:
        io.atomic_write(args.out, io.matrix_to_csv(res.sigma_s))
    if args.diagnostics:
        io.atomic_write(args.diagnostics, io.dumps(diag))
    _emit({"command": "shrink", **diag, "out": args.out,
           "config": {"kernel": args.kernel, "bandwidth": args.bandwidth, "weight": args.weight}})


def cmd_limit_build(args):
    scheme, innov, doc = _scheme_args(args)
    v = w = None
    if args.construction != "trace":
        if not args.weights:
            raise UsageError(f"{args.construction} construction needs --weights with (v, w)")
        vecs = from_json(io.read_json(args.weights))
        if len(vecs) not in (1, 2):
            raise UsageError("--weights must hold v, or v and w")
        v, w = vecs[0], vecs[-1]
    model = limit.build_limit_model(scheme, innov, v, w, args.construction, args.L_max)
    meta = model.to_dict()
    cov = meta.pop("cov")
    out = Path(args.out)
    cov_name = out.with_suffix(".cov.csv").name
    meta["cov_csv"] = cov_name
    io.atomic_write(out.parent / cov_name, io.matrix_to_csv(cov))
    io.atomic_write(out, io.dumps(meta))
    _emit({"command": "limit build", "out": str(out), "dim": model.dim, "jitter": model.jitter,
           "construction": model.construction, "config": doc})


def load_limit_model(path) -> limit.LimitModel:
    path = Path(path)
    meta = io.read_json(path)
    if "cov" not in meta:
        meta["cov"] = io.load_matrix(path.parent / meta["cov_csv"]).tolist()
    return limit.LimitModel.from_dict(meta)


def cmd_limit_sample(args):
    model = load_limit_model(args.model)
    grid = args.t if args.t else [1.0]
    paths = limit.sample_paths(model, grid, args.reps, args.seed)
    samples = paths[:, -1, :]
    io.atomic_write(args.out, io.matrix_to_csv(samples))
    _emit({"command": "limit sample", "out": args.out, "reps": args.reps, "dim": model.dim,
           "seed": args.seed, "config": {"model": str(args.model), "t": grid}})


def cmd_mc_run(args):
    doc = io.read_json(args.config)
    if args.workers is not None:
        doc["workers"] = args.workers
    elif "workers" not in doc:
        doc["workers"] = mc.default_workers()
    if args.seed is not None:
        doc["master_seed"] = args.seed
    if args.reps is not None:
        doc["reps"] = args.reps
    if args.record_reps:
        doc["record_reps"] = True
    try:
        config = mc.ExperimentConfig.from_dict(doc)
    except mc.ConfigError as exc:
        raise UsageError(str(exc))
    report = mc.run(config)
    out = Path(args.out)
    io.atomic_write(out / "report.json", io.dumps(report.to_dict()))
    if config.record_reps:
        io.atomic_write(out / "reps.csv", report.reps_csv())
    _emit({"command": "mc run", "experiment": config.experiment, "passed": report.passed,
           "failed": [a["name"] for a in report.assertions if not a["passed"]],
           "wall_clock": report.wall_clock, "out": str(out), "config": config.to_dict()})
    return 0 if report.passed else 1


def cmd_weights(args):
    if args.kind == "unit":
        vecs = [unit_vector(j, args.d) for j in (args.j or [1])]
    elif args.kind == "sparse":
        if not args.support or not args.values:
            raise UsageError("sparse weights need --support and --values")
        vecs = [sparse_l1(args.d, args.support, args.values)]
    else:
        vecs = near_orthogonal_family(args.d, args.m, args.A, args.seed)
    io.atomic_write(args.out, io.dumps(to_json(vecs)))
    summary = {"command": "weights", "kind": args.kind, "count": len(vecs), "d": args.d,
               "out": args.out, "l1": [v.l1 for v in vecs]}
    if len(vecs) > 1:
        summary["coherence"] = coherence(vecs)
    summary["config"] = {k: getattr(args, k) for k in ("d", "m", "A", "seed", "j", "support", "values")}
    _emit(summary)


# ---------------------------------------------------------------- parser

def _add_scheme(p, overrides=True):
    p.add_argument("--scheme", required=True, help="scheme JSON (with innovations block)")
    if overrides:
        p.add_argument("--d", type=int)
        p.add_argument("--J", type=int)
        p.add_argument("--theta", type=float)
        p.add_argument("--family", choices=["gaussian", "student_t", "two_point"])
        p.add_argument("--sigma-sq", dest="sigma_sq", type=float)


def _add_kernel(p):
    p.add_argument("--kernel", default="bartlett", choices=["bartlett", "rectangular", "parzen"])
    p.add_argument("--bandwidth", default="auto")


def _add_weights(p):
    p.add_argument("--weights", help="weight JSON: list of vectors")
    p.add_argument("--all-pairs", action="store_true", help="use every pair of the listed vectors")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hidimcov", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a panel from a linear-process scheme")
    _add_scheme(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help=".csv for CSV, anything else for HDCV binary")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cov", help="sample covariance and bilinear-form paths")
    p.add_argument("--panel", required=True)
    p.add_argument("--out")
    p.add_argument("--sigma", help="population covariance CSV, needed for --path-out")
    p.add_argument("--path-out", dest="path_out")
    _add_weights(p)
    p.set_defaults(func=cmd_cov)

    p = sub.add_parser("asymvar", help="analytic long-run covariances of bilinear forms")
    _add_scheme(p)
    _add_weights(p)
    p.add_argument("--L-max", dest="L_max", type=int)
    p.add_argument("--out", help="beta matrix CSV (a JSON sidecar is written next to it)")
    p.set_defaults(func=cmd_asymvar)

    p = sub.add_parser("trace-ci", help="confidence interval for the scaled trace")
    p.add_argument("--panel", required=True)
    _add_kernel(p)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out")
    p.set_defaults(func=cmd_trace_ci)

    p = sub.add_parser("shrink", help="shrinkage estimator toward mu*I")
    p.add_argument("--panel", required=True)
    _add_kernel(p)
    p.add_argument("--weight", default="estimate", help="estimate | fixed:<w> | oracle:<scheme.json>")
    p.add_argument("--out")
    p.add_argument("--diagnostics")
    p.set_defaults(func=cmd_shrink)

    p = sub.add_parser("limit", help="Gaussian limit models")
    lsub = p.add_subparsers(dest="action", required=True)
    q = lsub.add_parser("build")
    _add_scheme(q)
    q.add_argument("--weights")
    q.add_argument("--construction", default="two_block", choices=list(limit.CONSTRUCTIONS))
    q.add_argument("--L-max", dest="L_max", type=int)
    q.add_argument("--out", required=True, help="model JSON; covariance goes to <stem>.cov.csv")
    q.set_defaults(func=cmd_limit_build)
    q = lsub.add_parser("sample")
    q.add_argument("--model", required=True)
    q.add_argument("--reps", type=int, required=True)
    q.add_argument("--seed", type=int, required=True)
    q.add_argument("--t", type=float, nargs="+", help="time grid; the last point is emitted")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_limit_sample)

    p = sub.add_parser("mc", help="Monte Carlo experiments")
    msub = p.add_subparsers(dest="action", required=True)
    q = msub.add_parser("run")
    q.add_argument("--config", required=True)
    q.add_argument("--out", required=True, help="output directory")
    q.add_argument("--workers", type=int, help="default: $HIDIMCOV_WORKERS or 1")
    q.add_argument("--seed", type=int, help="overrides master_seed")
    q.add_argument("--reps", type=int)
    q.add_argument("--record-reps", dest="record_reps", action="store_true")
    q.set_defaults(func=cmd_mc_run)

    p = sub.add_parser("weights", help="generate weight vectors")
    p.add_argument("kind", choices=["unit", "sparse", "near-orth"])
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--j", type=int, nargs="+", help="unit: coordinates (1-based)")
    p.add_argument("--support", type=int, nargs="+")
    p.add_argument("--values", type=float, nargs="+")
    p.add_argument("--m", type=int, default=8, help="near-orth: family size")
    p.add_argument("--A", type=float, default=2.0, help="near-orth: coherence constant")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_weights)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        code = args.func(args)
    except (UsageError, mc.ConfigError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"hidimcov: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, FactorizationError, FamilyNotFound) as exc:
        print(f"hidimcov: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0 if code is None else code


if __name__ == "__main__":
    sys.exit(main())
