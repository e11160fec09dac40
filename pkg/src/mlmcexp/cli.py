"""Command-line interface.

Exit codes: 0 on success, 1 on usage or input errors, 2 when the adaptive
driver fails to converge (a partial result is still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings

import numpy as np

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NONCONVERGED = 2

log = logging.getLogger("mlmcexp")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _auto_float(s):
    return None if s == "auto" else float(s)


def _auto_int(s):
    return None if s == "auto" else int(s)


def _common(p, epsilon=True):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=0, help="worker threads (0 = all)")
    if epsilon:
        p.add_argument("--epsilon", type=float, default=1e-2, help="target RMS error")
    p.add_argument("--beta", type=_auto_float, default=None, help="scale, or 'auto' for 1/d_max")
    p.add_argument("--l0", type=_auto_int, default=None, help="coarsest level, or 'auto'")
    if epsilon:
        p.add_argument("--max-extra-levels", type=int, default=30,
                       help="give up (exit 2) when L - l0 would exceed this")
    p.add_argument("--output", "-o", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _graph_args(p, required=False):
    g = p.add_argument_group("instance")
    src = g.add_mutually_exclusive_group(required=required)
    src.add_argument("--matrix", help="Matrix Market file")
    src.add_argument("--graph", choices=("smallw", "pref"), help="generate a graph instead")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--p", type=float, default=0.1)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--graph-seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="mlmcexp", description="Multilevel Monte Carlo for e^{beta A} u")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a synthetic graph as Matrix Market")
    p.add_argument("kind", choices=("smallw", "pref"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", required=True)

    p = sub.add_parser("communicability", help="total or single-node communicability")
    _graph_args(p, required=True)
    p.add_argument("--node", type=int, default=None, help="single node (default: total)")
    _common(p)

    p = sub.add_parser("entry", help="one entry of e^{beta A} u")
    p.add_argument("--matrix", required=True)
    p.add_argument("--vector", default=None, help="vector file (default: all ones)")
    p.add_argument("--index", type=int, required=True)
    _common(p)

    p = sub.add_parser("heat3d", help="3D heat equation at one point")
    p.add_argument("--nx", type=int, default=16)
    p.add_argument("--delta", type=float, default=4.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--point", type=float, nargs=3, default=(0.0, 0.0, 0.0))
    p.add_argument("--initial", choices=("gaussian", "eigen"), default="gaussian")
    _common(p)

    p = sub.add_parser("convdiff", help="lumped-mass FEM system at one node")
    p.add_argument("--mass", required=True)
    p.add_argument("--stiffness", required=True)
    p.add_argument("--load", required=True)
    p.add_argument("--u0", required=True)
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--t", type=float, default=1.0)
    _common(p)

    p = sub.add_parser("bench-levels", help="level means/variances on fixed sample counts")
    _graph_args(p)
    p.add_argument("--node", type=int, default=0)
    p.add_argument("--levels", type=int, nargs="+", default=None)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--growth", type=float, default=1.0)
    _common(p, epsilon=False)

    p = sub.add_parser("bench-complexity", help="cost versus epsilon, MLMC and classical MC")
    _graph_args(p)
    p.add_argument("--node", type=int, default=0)
    p.add_argument("--epsilons", type=float, nargs="+", default=[4e-3, 2e-3, 1e-3, 5e-4, 2.5e-4])
    p.add_argument("--methods", nargs="+", choices=("mlmc", "mc"), default=["mlmc", "mc"])
    p.add_argument("--warmup", type=int, default=1000)
    _common(p, epsilon=False)

    p = sub.add_parser("bench-l0", help="total cost for a range of l0")
    _graph_args(p)
    p.add_argument("--node", type=int, default=0)
    p.add_argument("--l0s", type=int, nargs="+", default=None)
    p.add_argument("--warmup", type=int, default=1000)
    _common(p)
    return ap


def _matrix(args):
    from .io import read_matrix_market
    from .netgen import GraphSpec

    if getattr(args, "matrix", None):
        return read_matrix_market(args.matrix)
    return GraphSpec(args.graph, args.n, args.k, args.p, args.d, args.graph_seed).build()


def _bench_config(args):
    from .bench import BenchConfig
    from .netgen import GraphSpec

    if args.matrix is None and args.graph is None:
        return BenchConfig(node=args.node, beta=args.beta, seed=args.seed)
    return BenchConfig(node=args.node, beta=args.beta, seed=args.seed, matrix=_matrix(args))


def _config_echo(args) -> dict:
    skip = {"output", "format", "verbose"}
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(args).items() if k not in skip}


def _emit_record(result, args):
    from .io import ResultRecord, write_result

    rec = ResultRecord.from_mlmc(result, _config_echo(args))
    if args.output:
        write_result(rec, args.output, args.format)
    else:
        print(f"estimate {rec.estimate!r}")
        print(f"statistical_error {rec.statistical_error!r}")
        print(f"bias_estimate {rec.bias_estimate!r}")
        if rec.quadrature_error is not None:
            print(f"quadrature_error {rec.quadrature_error!r}")
        print(f"total_cost {rec.total_cost}")
        print(f"converged {str(rec.converged).lower()}")


def _emit_bench(bench, args):
    if args.output:
        bench.to_csv(args.output)
    else:
        print(",".join(bench.header))
        for r in bench.rows:
            print(",".join(repr(v) if isinstance(v, float) else str(v) for v in r))
    print(json.dumps({k: (None if isinstance(v, float) and math.isnan(v) else v)
                      for k, v in bench.summary().items()}))


def _heat_initial(kind, delta):
    if kind == "gaussian":
        return lambda x, y, z: np.exp(-(x * x + y * y + z * z))
    c = np.pi / (2.0 * delta)
    return lambda x, y, z: np.sin(c * (x + delta)) * np.sin(c * (y + delta)) * np.sin(c * (z + delta))


def _run(args):
    from . import applications as app
    from .io import read_vector, write_matrix_market
    from .mlmc import mlmc
    from .netgen import GraphSpec
    from .paths import Target, configure_threads
    from .sparse import decompose, spectral_scale

    if args.command == "gen":
        a = GraphSpec(args.kind, args.n, args.k, args.p, args.d, args.seed).build()
        write_matrix_market(args.output, a, symmetric=True,
                            comment=f"{args.kind} n={args.n} k={args.k} p={args.p} d={args.d} seed={args.seed}")
        return None

    if args.threads < 0:
        raise _UsageError("--threads must be >= 0")
    used = configure_threads(args.threads)
    if args.threads and used < args.threads:
        log.warning("using %d threads (pool size limited by NUMBA_NUM_THREADS)", used)

    kw = {"l0": args.l0}
    if hasattr(args, "max_extra_levels") and args.command != "bench-l0":
        kw["max_extra_levels"] = args.max_extra_levels

    if args.command == "communicability":
        a = _matrix(args)
        if args.node is None:
            return app.total_communicability(a, args.beta, args.epsilon, args.seed, **kw)
        return app.node_communicability(a, args.node, args.beta, args.epsilon, args.seed, **kw)

    if args.command == "entry":
        from .io import read_matrix_market

        a = read_matrix_market(args.matrix)
        dec = decompose(a)
        u = np.ones(a.n) if args.vector is None else read_vector(args.vector, a.n)
        beta = spectral_scale(dec) if args.beta is None else args.beta
        return mlmc(Target(dec, u, "entry", args.index), beta, args.epsilon, args.seed, **kw)

    if args.command == "heat3d":
        if args.beta is not None:
            raise _UsageError("heat3d takes --t; beta follows from t and the grid")
        grid = app.Grid3D(args.nx, args.delta)
        return app.solve_heat_point(grid, _heat_initial(args.initial, args.delta), args.point,
                                    args.t, args.epsilon, args.seed, **kw)

    if args.command == "convdiff":
        if args.beta is not None:
            raise _UsageError("convdiff takes --t, not --beta")
        system = app.load_fem_system(args.mass, args.stiffness, args.load, args.u0)
        return app.solve_convdiff_point(system, args.node, args.t, args.epsilon, args.seed, **kw)

    from . import bench

    cfg = _bench_config(args)
    if args.command == "bench-levels":
        return bench.bench_levels(cfg, args.levels, args.samples, args.growth, args.l0)
    if args.command == "bench-complexity":
        return bench.bench_complexity(cfg, args.epsilons, tuple(args.methods), args.warmup)
    if args.command == "bench-l0":
        return bench.bench_l0(cfg, args.epsilon, args.l0s, args.warmup)
    raise _UsageError(f"unknown command {args.command}")


class _UsageError(Exception):
    pass


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.filterwarnings("ignore", message=".*TBB.*")

    from .errors import MlmcExpError, NonConvergenceError

    try:
        out = _run(args)
    except NonConvergenceError as exc:
        print(f"mlmcexp: {exc}", file=sys.stderr)
        if exc.result is not None:
            _emit_record(exc.result, args)
        return EXIT_NONCONVERGED
    except (_UsageError, MlmcExpError, OSError) as exc:
        print(f"mlmcexp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if out is None:
        return EXIT_OK
    if hasattr(out, "rows"):
        _emit_bench(out, args)
    else:
        _emit_record(out, args)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
