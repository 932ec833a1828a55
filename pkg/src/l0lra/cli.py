"""Command line interface: ``l0lra gen|solve|eval|bench``.

Exit codes: 0 on success, 2 when a precondition fails, 3 on I/O or
file format errors.  The seed comes from ``--seed``, then the
``L0LRA_SEED`` environment variable, then 0.
"""
import argparse
import csv
import io
import json
import os
import sys
import time

import numpy as np

from . import boolrank1, instances, rank1, rankk
from .errors import MatrixFormatError, PreconditionError
from .matcore import (from_dense, l0_distance_exact, outer_product, read_matrix_market,
                      residual_exact)

ALGORITHMS = ("rank1-baseline", "rank1", "rank1-bool", "bool-smallopt", "bool-combined",
              "bool-exact", "rankk-basic", "rankk-bicriteria", "certify")
BOOLEAN_ALGORITHMS = ("rank1-bool", "bool-smallopt", "bool-combined", "bool-exact")
RANKK_ALGORITHMS = ("rankk-basic", "rankk-bicriteria", "certify")
BENCH_FIELDS = ("suite", "n", "phi", "mode", "rep", "nnz", "cost", "entry_reads",
                "nonzero_samples", "adjacency_reads", "reads")


# -- helpers --------------------------------------------------------------
def _tolist(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    raise TypeError("not JSON serialisable: %r" % type(x))


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, default=_tolist)


def _resolve_seed(args):
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get("L0LRA_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise PreconditionError("L0LRA_SEED must be an integer, got %r" % env)
    return 0


def _emit(rows, fmt, out):
    """Write a dict (or list of dicts) as JSON or CSV."""
    if fmt == "csv":
        rows = rows if isinstance(rows, list) else [rows]
        flat = [{k: (_dumps(v) if isinstance(v, (dict, list, np.ndarray)) else v)
                 for k, v in r.items()} for r in rows]
        keys = sorted({k for r in flat for k in r})
        w = csv.DictWriter(out, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in flat:
            w.writerow(r)
    else:
        out.write(_dumps(rows) + "\n")


# -- gen ------------------------------------------------------------------
GENERATOR_PARAMS = {
    "identity-plus-ones": ("n",),
    "planted-real": ("m", "n", "s"),
    "planted-bool": ("m", "n", "alpha", "beta", "s"),
    "planted-rankk": ("m", "n", "k", "s"),
    "gaussian-identity": ("n", "k"),
    "sample-lb-hard": ("n", "phi"),
}


def cmd_gen(args, out):
    seed = _resolve_seed(args)
    rng = np.random.default_rng(seed)
    g = args.generator
    missing = [p for p in GENERATOR_PARAMS[g] if getattr(args, p, None) is None]
    if missing:
        raise PreconditionError("%s needs --%s" % (g, " --".join(missing)))
    if g == "identity-plus-ones":
        A = instances.gen_identity_plus_ones(args.n)
        side = {"generator": g, "seed": seed, "params": {"n": args.n}}
    elif g == "planted-real":
        inst = instances.gen_planted_rank1_real(args.m, args.n, args.density, args.s, rng)
        A, side = inst.matrix, instances.instance_sidecar(inst, g, seed)
    elif g == "planted-bool":
        inst = instances.gen_planted_boolean(args.m, args.n, args.alpha, args.beta, args.s, rng)
        A, side = inst.matrix, instances.instance_sidecar(inst, g, seed)
    elif g == "planted-rankk":
        inst = instances.gen_planted_rankk_real(args.m, args.n, args.k, args.s, rng)
        A, side = inst.matrix, instances.instance_sidecar(inst, g, seed)
    elif g == "gaussian-identity":
        inst = instances.gen_gaussian_identity(args.n, args.k, rng, full_output=True)
        A, side = inst.matrix, instances.instance_sidecar(inst, g, seed)
    else:
        inst = instances.gen_sample_lb_hard(args.n, args.phi, rng, full_output=True)
        A, side = inst.matrix, instances.instance_sidecar(inst, g, seed)
    mpath, jpath = instances.save_instance(args.out, A, side)
    _emit({"matrix": mpath, "sidecar": jpath, "m": A.m, "n": A.n, "nnz": A.total_nnz},
          args.format, out)
    return 0


# -- solve ----------------------------------------------------------------
def _rank1_payload(sol):
    d = {"type": "rank1", "coeffs": sol.coeffs}
    if sol.u is not None:
        d["u"] = sol.u
    else:
        d["column"] = sol.column
    return d


def _load_factors(path, matrix_path):
    if path is None:
        path = os.path.splitext(matrix_path)[0] + ".json"
    with open(path) as fh:
        side = json.load(fh)
    f = side.get("factors", side)
    if "U" in f:
        return np.array(f["U"], dtype=np.float64), np.array(f["V"], dtype=np.float64)
    if "u" in f:
        return (np.array(f["u"], dtype=np.float64)[:, None],
                np.array(f["v"], dtype=np.float64)[None, :])
    raise MatrixFormatError("%s holds no factors" % path)


def _run_oracle(algo, A, k):
    if algo in BOOLEAN_ALGORITHMS:
        sol = boolrank1.boolean_exhaustive_oracle(A)
        return {"cost_exact": sol.cost, "oracle": "exhaustive"}, \
            {"type": "rank1", "u": sol.u, "coeffs": sol.v}
    kk = 1 if algo in ("rank1", "rank1-baseline") else k
    lower, upper = rankk.rankk_bracket_oracle(A, kk)
    return {"cost_exact": upper, "oracle": "bracket", "lower": lower, "upper": upper,
            "k": kk}, None


def _run_solver(args, A, rng):
    algo = args.algorithm
    eps = args.epsilon
    if algo == "rank1-baseline":
        sol = rank1.solve_rank1_baseline(A)
        return {"cost_exact": sol.cost_exact, "cost_estimate": sol.cost_estimate,
                "column": sol.column}, _rank1_payload(sol)
    if algo in ("rank1", "rank1-bool"):
        f = rank1.solve_rank1 if algo == "rank1" else rank1.solve_rank1_boolean_2eps
        sol = f(A, eps, rng, threads=args.threads)
        return {"cost_exact": sol.cost_exact, "cost_estimate": sol.cost_estimate,
                "column": sol.column}, _rank1_payload(sol)
    if algo in ("bool-smallopt", "bool-combined", "bool-exact"):
        if algo == "bool-smallopt":
            if args.phi is None:
                raise PreconditionError("bool-smallopt needs --phi")
            sol = boolrank1.solve_boolean_smallopt(A, args.phi, args.mode, rng,
                                                   args.probe_constant)
        elif algo == "bool-combined":
            sol = boolrank1.solve_boolean_combined(A, rng, args.mode, args.probe_constant)
        else:
            sol = boolrank1.solve_boolean_exact_fpt(A, rng, strict=args.strict)
        rep = {"cost_exact": sol.cost, "fallback": sol.fallback,
               "rank": int(sol.u.any() and sol.v.any())}
        return rep, {"type": "rank1", "u": sol.u, "coeffs": sol.v}
    if algo == "certify":
        U, V = _load_factors(args.factors, args.matrix)
        sol = rankk.certify_column_selection(A, U, V, rng)
    elif algo == "rankk-basic":
        sol = rankk.solve_rankk_basic(A, args.k, rng)
    else:
        sol = rankk.solve_rankk_bicriteria(A, args.k, rng, threads=args.threads)
    rep = {"cost_exact": sol.cost, "rank": sol.rank, "columns": sol.columns}
    return rep, {"type": "rankk", "J": sol.columns, "Z": sol.coeffs}


def cmd_solve(args, out):
    seed = _resolve_seed(args)
    rng = np.random.default_rng(seed)
    A = read_matrix_market(args.matrix)
    if args.algorithm in BOOLEAN_ALGORITHMS and not A.binary:
        raise PreconditionError("%s needs a binary (pattern or 0/1) matrix" % args.algorithm)
    A.stats.reset()
    t0 = time.perf_counter()
    if args.oracle:
        rep, payload = _run_oracle(args.algorithm, A, args.k)
    else:
        rep, payload = _run_solver(args, A, rng)
    wall = time.perf_counter() - t0
    stats = A.stats.snapshot()
    report = {"algorithm": args.algorithm,
              "params": {"k": args.k, "epsilon": args.epsilon, "phi": args.phi,
                         "seed": seed, "mode": args.mode},
              "m": A.m, "n": A.n, "nnz": A.total_nnz}
    report.update(rep)
    report.update(stats)
    if args.timing:
        report["wall_time"] = wall
    if args.solution_out and payload is not None:
        with open(args.solution_out, "w") as fh:
            fh.write(_dumps(payload) + "\n")
    _emit(report, args.format, out)
    return 0


# -- eval -----------------------------------------------------------------
def evaluate_solution(A, sol):
    """Exact cost of a solution dict (rank1, rankk or factors)."""
    kind = sol.get("type")
    if kind is None and "factors" in sol:
        sol = dict(sol["factors"], type="factors")
        kind = "factors"
    if kind == "rank1":
        coeffs = np.array(sol["coeffs"], dtype=np.float64)
        if "u" in sol:
            u = np.array(sol["u"], dtype=np.float64)
            return l0_distance_exact(A, outer_product(u, coeffs))
        return residual_exact(A, int(sol["column"]), coeffs)
    if kind == "rankk":
        J = np.array(sol["J"], dtype=np.int64)
        Z = np.array(sol["Z"], dtype=np.float64).reshape(J.size, A.n)
        return rankk.residual_rankk_exact(A, J, Z)
    if kind == "factors":
        if "u" in sol:
            return l0_distance_exact(A, outer_product(np.array(sol["u"], dtype=np.float64),
                                                      np.array(sol["v"], dtype=np.float64)))
        U = np.array(sol["U"], dtype=np.float64)
        V = np.array(sol["V"], dtype=np.float64)
        return l0_distance_exact(A, from_dense(U @ V))
    raise MatrixFormatError("unknown solution type %r" % (kind,))


def cmd_eval(args, out):
    A = read_matrix_market(args.matrix)
    try:
        with open(args.solution) as fh:
            sol = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MatrixFormatError("%s: %s" % (args.solution, exc))
    cost = evaluate_solution(A, sol)
    _emit({"matrix": args.matrix, "solution": args.solution, "cost": int(cost)},
          args.format, out)
    return 0


# -- bench ----------------------------------------------------------------
def _bench_instance(suite, n, phi, rng):
    if suite == "planted-bool":
        a = 2 * n // 5
        s = max(1, int(phi * a * a / 4))
        return instances.gen_planted_boolean(n, n, a, a, s, rng).matrix
    if suite == "sample-lb-hard":
        return instances.gen_sample_lb_hard(n, phi, rng)
    raise PreconditionError("unknown bench suite %r" % suite)


def bench_rows(suite, sizes, phis, modes, reps, seed, c=boolrank1.PROBE_CONSTANT):
    """Read counts of the small-OPT algorithm over a parameter sweep."""
    rows = []
    root = np.random.default_rng(seed)
    for n in sizes:
        for phi in phis:
            for rep in range(reps):
                sub = np.random.default_rng(int(root.integers(0, 2 ** 63)))
                A = _bench_instance(suite, n, phi, sub)
                for mode in modes:
                    A.stats.reset()
                    sol = boolrank1.solve_boolean_smallopt(A, phi, mode, sub, c)
                    st = A.stats.snapshot()
                    rows.append({"suite": suite, "n": n, "phi": phi, "mode": mode, "rep": rep,
                                 "nnz": A.total_nnz, "cost": sol.cost,
                                 "entry_reads": st["entry_reads"],
                                 "nonzero_samples": st["nonzero_samples"],
                                 "adjacency_reads": st["adjacency_reads"],
                                 "reads": sum(st.values())})
    return rows


def cmd_bench(args, out):
    seed = _resolve_seed(args)
    rows = bench_rows(args.suite, args.sizes, args.phis, args.modes, args.reps, seed,
                      args.probe_constant)
    if args.format == "json":
        _emit(rows, "json", out)
    else:
        w = csv.DictWriter(out, fieldnames=BENCH_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
    return 0


# -- parser ---------------------------------------------------------------
def _global_flags(suppress):
    p = argparse.ArgumentParser(add_help=False)
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d, help="64-bit seed (default $L0LRA_SEED or 0)")
    p.add_argument("--epsilon", type=float, default=d if suppress else 0.1)
    p.add_argument("--phi", type=float, default=d)
    p.add_argument("--threads", type=int, default=d if suppress else 1)
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="format", action="store_const", const="json",
                     default=d)
    fmt.add_argument("--csv", dest="format", action="store_const", const="csv", default=d)
    return p


def build_parser():
    top = _global_flags(False)
    parser = argparse.ArgumentParser(prog="l0lra", parents=[top],
                                     description="l0 low-rank approximation toolkit")
    g = _global_flags(True)
    sub = parser.add_subparsers(dest="command", required=True)

    pg = sub.add_parser("gen", parents=[g], help="generate an instance")
    pg.add_argument("generator", choices=("identity-plus-ones", "planted-real", "planted-bool",
                                          "planted-rankk", "gaussian-identity",
                                          "sample-lb-hard"))
    pg.add_argument("--m", type=int)
    pg.add_argument("--n", type=int)
    pg.add_argument("--k", type=int)
    pg.add_argument("--s", type=int)
    pg.add_argument("--alpha", type=int)
    pg.add_argument("--beta", type=int)
    pg.add_argument("--density", type=float, default=0.5)
    pg.add_argument("--out", default="instance", help="output prefix for .mtx and .json")
    pg.set_defaults(func=cmd_gen)

    ps = sub.add_parser("solve", parents=[g], help="run a solver")
    ps.add_argument("algorithm", choices=ALGORITHMS)
    ps.add_argument("matrix")
    ps.add_argument("--k", type=int, default=2)
    ps.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    ps.add_argument("--probe-constant", type=float, default=boolrank1.PROBE_CONSTANT)
    ps.add_argument("--factors", help="JSON with U, V (default: the matrix sidecar)")
    ps.add_argument("--solution-out")
    ps.add_argument("--oracle", action="store_true", help="run the verification oracle")
    ps.add_argument("--strict", action="store_true",
                    help="bool-exact: fail instead of enumerating outside its regime")
    ps.add_argument("--timing", action="store_true", help="include wall time")
    ps.set_defaults(func=cmd_solve)

    pe = sub.add_parser("eval", parents=[g], help="exact cost of a solution file")
    pe.add_argument("matrix")
    pe.add_argument("solution")
    pe.set_defaults(func=cmd_eval)

    pb = sub.add_parser("bench", parents=[g], help="read counts of the small-OPT algorithm")
    pb.add_argument("--suite", choices=("planted-bool", "sample-lb-hard"),
                    default="planted-bool")
    pb.add_argument("--sizes", type=int, nargs="+", default=[500, 1000, 2000])
    pb.add_argument("--phis", type=float, nargs="+", default=[0.01])
    pb.add_argument("--modes", nargs="+", choices=("exact", "sampled"),
                    default=["exact", "sampled"])
    pb.add_argument("--reps", type=int, default=1)
    pb.add_argument("--probe-constant", type=float, default=boolrank1.PROBE_CONSTANT)
    pb.set_defaults(func=cmd_bench)
    return parser


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = "csv" if args.command == "bench" else "json"
    try:
        return args.func(args, out)
    except PreconditionError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except (OSError, MatrixFormatError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3


def run(argv):
    """Run the CLI and capture stdout; returns ``(code, text)``."""
    buf = io.StringIO()
    code = main(argv, buf)
    return code, buf.getvalue()
