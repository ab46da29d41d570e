"""Command-line interface: ``curvlab {generate,curvature,sweep,ratio,validate}``.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from curvlab import io as cio
from curvlab.curvature import DEFAULT_CAP_FACTOR, compute_curvature, edge_error_profile
from curvlab.geometry import make_manifold, sample_uniform
from curvlab.harness import (
    PRESETS,
    SWEEP_COLUMNS,
    SweepConfig,
    convergence_sweep,
    epsilon_schedule,
    ratio_statistics,
)
from curvlab.rgg import build_rgg, graph_from_edges, preprocess_weights

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VALIDATION = 0, 1, 2, 3

log = logging.getLogger("curvlab")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dim(text):
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("dimension must be >= 2")
    return value


def _int_list(text):
    return tuple(int(t) for t in text.replace(",", " ").split())


def _float_list(text):
    return tuple(float(t) for t in text.replace(",", " ").split())


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("CURVLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"CURVLAB_THREADS must be an integer, got {env!r}")
    return 1


def _add_manifold(p, dims=False):
    p.add_argument("--manifold", choices=("sphere", "torus"), default="sphere")
    if dims:
        p.add_argument("--dims", type=_int_list, default=(2,), help="comma separated dimensions")
    else:
        p.add_argument("--dim", type=_dim, default=2)
    p.add_argument("--sides", type=_float_list, default=None,
                   help="torus side lengths (one value is repeated)")


def _manifold(args):
    sides = args.sides
    if sides is not None and len(sides) == 1:
        sides = sides * args.dim
    try:
        return make_manifold(args.manifold, args.dim, sides)
    except ValueError as err:
        raise UsageError(str(err))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="curvlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="sample a random geometric graph")
    _add_manifold(gen)
    gen.add_argument("--nodes", type=int, required=True)
    grp = gen.add_mutually_exclusive_group(required=True)
    grp.add_argument("--epsilon", type=float)
    grp.add_argument("--avg-degree", type=float)
    gen.add_argument("--ref-nodes", type=int, default=None,
                     help="node count at which --avg-degree holds (default: --nodes)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--accelerate", action="store_true", help="KD-tree candidate search")
    gen.add_argument("--out", required=True)

    cur = sub.add_parser("curvature", help="edge ORC and node scalar ORC for a graph")
    cur.add_argument("--in", dest="input", required=True,
                     help="graph JSON, or a CSV edge list i,j,w")
    cur.add_argument("--out", required=True, help="output directory")
    cur.add_argument("--format", choices=("csv", "json"), default="csv")
    cur.add_argument("--node-sample", type=int, default=None)
    cur.add_argument("--seed", type=int, default=0)
    cur.add_argument("--with-src", action="store_true")
    cur.add_argument("--with-error-profile", action="store_true")
    cur.add_argument("--transform", choices=("none", "reciprocal", "negexp", "shift"), default="none",
                     help="monotone decreasing weight transform for edge-list input")
    cur.add_argument("--threshold", type=float, default=math.inf,
                     help="drop edges whose transformed weight is >= this value")
    cur.add_argument("--dim", type=_dim, default=None,
                     help="intrinsic dimension for scaling (required for edge lists)")
    cur.add_argument("--epsilon", type=float, default=None,
                     help="scale for edge lists (default: threshold, else max weight)")
    cur.add_argument("--cap-factor", type=float, default=DEFAULT_CAP_FACTOR)
    cur.add_argument("--threads", type=int, default=None)

    sw = sub.add_parser("sweep", help="mean scaled SORC against N")
    _add_manifold(sw, dims=True)
    sw.add_argument("--nodes", type=_int_list, default=(1000, 2000, 4000, 8000))
    sw.add_argument("--preset", choices=tuple(PRESETS), default="degree50")
    sw.add_argument("--avg-degree", type=float, default=None, help="overrides --preset")
    sw.add_argument("--ref-nodes", type=int, default=1000)
    sw.add_argument("--seeds", type=_int_list, default=(0, 1, 2))
    sw.add_argument("--master-seed", type=int, default=0)
    sw.add_argument("--node-sample", type=int, default=500)
    sw.add_argument("--no-src", action="store_true")
    sw.add_argument("--threads", type=int, default=None)
    sw.add_argument("--out", required=True)

    ra = sub.add_parser("ratio", help="statistics of eps / d over edges")
    _add_manifold(ra)
    ra.add_argument("--in", dest="input", default=None, help="graph JSON instead of sampling")
    ra.add_argument("--nodes", type=_int_list, default=(8000,))
    ra.add_argument("--preset", choices=tuple(PRESETS), default="degree50")
    ra.add_argument("--avg-degree", type=float, default=None)
    ra.add_argument("--ref-nodes", type=int, default=1000)
    ra.add_argument("--seed", type=int, default=0)
    ra.add_argument("--out", required=True)

    va = sub.add_parser("validate", help="run the built-in verification battery")
    va.add_argument("--seed", type=int, default=0)
    va.add_argument("--out", default=None, help="optional CSV of check results")
    return parser


def cmd_generate(args) -> int:
    manifold = _manifold(args)
    if args.nodes < 0:
        raise UsageError("--nodes must be nonnegative")
    if args.avg_degree is not None:
        ref = args.ref_nodes or args.nodes
        try:
            eps = epsilon_schedule(args.dim, args.nodes, args.avg_degree, ref, manifold)
        except ValueError as err:
            raise UsageError(str(err))
    else:
        eps = args.epsilon
        if not eps > 0:
            raise UsageError("--epsilon must be positive")
        if eps >= manifold.injectivity_radius:
            raise UsageError(f"epsilon {eps} reaches the injectivity radius {manifold.injectivity_radius}")
    points = sample_uniform(manifold, args.nodes, args.seed)
    graph = build_rgg(points, eps, manifold, accelerate=args.accelerate, seed=args.seed)
    cio.write_graph(graph, args.out)
    log.info("wrote %s: N=%d edges=%d eps=%.6g", args.out, graph.num_nodes, graph.num_edges, eps)
    return EXIT_OK


def _load_for_curvature(args):
    path = Path(args.input)
    if path.suffix.lower() == ".json":
        graph = cio.read_graph(path)
        if args.dim is not None and args.dim != graph.n_intrinsic:
            raise UsageError("--dim disagrees with the graph header")
        return graph
    num_nodes, edges = cio.read_edge_list(path)
    if args.dim is None:
        raise UsageError("edge-list input needs --dim for the curvature scaling")
    if args.transform != "none":
        try:
            edges = preprocess_weights(edges, args.transform, args.threshold)
        except ValueError as err:
            raise cio.GraphFormatError(f"{path}: {err}")
    elif math.isfinite(args.threshold):
        edges = [e for e in edges if e[2] < args.threshold]
    if any(not e[2] > 0 for e in edges):
        raise cio.GraphFormatError(f"{path}: weights must be positive")
    eps = args.epsilon
    if eps is None:
        eps = args.threshold if math.isfinite(args.threshold) else max((e[2] for e in edges), default=1.0)
    try:
        return graph_from_edges(num_nodes, edges, epsilon=eps, n_intrinsic=args.dim)
    except ValueError as err:
        raise cio.GraphFormatError(f"{path}: {err}")


def cmd_curvature(args) -> int:
    graph = _load_for_curvature(args)
    if args.with_src and graph.manifold is None:
        raise UsageError("--with-src needs a graph file with manifold metadata")
    if args.with_error_profile and graph.manifold is None:
        raise UsageError("--with-error-profile needs manifold metadata")
    if args.node_sample is not None and args.node_sample < 0:
        raise UsageError("--node-sample must be nonnegative")
    report = compute_curvature(graph, node_sample=args.node_sample, seed=args.seed,
                               cap_factor=args.cap_factor, threads=_threads(args),
                               with_src=args.with_src)
    edge_rows = [(e.x, e.y, e.weight, e.w1, e.kappa, e.status) for e in report.edges]
    node_rows = [(nc.node, nc.degree, nc.sorc, nc.scaled_sorc, nc.src, nc.scaled_src,
                  nc.undefined_edge_count) for nc in report.nodes]
    profile = edge_error_profile(graph, graph.manifold, report.edges) if args.with_error_profile else None

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        cio.write_csv(out / "edges.csv", cio.EDGE_COLUMNS, edge_rows)
        cio.write_csv(out / "nodes.csv", cio.NODE_COLUMNS, node_rows)
        if profile is not None:
            cio.write_csv(out / "error_profile.csv", cio.PROFILE_COLUMNS,
                          [tuple(r[c] for c in cio.PROFILE_COLUMNS) for r in profile])
    else:
        doc = {
            "edges": [dict(zip(cio.EDGE_COLUMNS, r)) for r in edge_rows],
            "nodes": [dict(zip(cio.NODE_COLUMNS, r)) for r in node_rows],
            "diagnostics": report.diagnostics,
        }
        if profile is not None:
            doc["error_profile"] = profile
        (out / "curvature.json").write_text(json.dumps(doc, indent=1, default=float) + "\n")
    log.info("curvature: %s", report.diagnostics)
    return EXIT_OK


def cmd_sweep(args) -> int:
    k_ref = args.avg_degree if args.avg_degree is not None else PRESETS[args.preset]
    try:
        config = SweepConfig(manifold=args.manifold, dims=tuple(args.dims), node_counts=tuple(args.nodes),
                             avg_degree_ref=k_ref, n_ref=args.ref_nodes, seeds=tuple(args.seeds),
                             master_seed=args.master_seed, node_sample=args.node_sample,
                             threads=_threads(args), sides=args.sides, with_src=not args.no_src)
    except ValueError as err:
        raise UsageError(str(err))
    rows = convergence_sweep(config)
    cio.write_csv(args.out, SWEEP_COLUMNS, [r.values() for r in rows])
    return EXIT_OK


def cmd_ratio(args) -> int:
    k_ref = args.avg_degree if args.avg_degree is not None else PRESETS[args.preset]
    stats = []
    if args.input:
        graph = cio.read_graph(args.input)
        stats.append(ratio_statistics(graph, graph.manifold))
    else:
        manifold = _manifold(args)
        for num_nodes in args.nodes:
            try:
                eps = epsilon_schedule(args.dim, num_nodes, k_ref, args.ref_nodes, manifold)
            except ValueError as err:
                raise UsageError(str(err))
            rng = np.random.default_rng(np.random.SeedSequence([args.seed, args.dim, num_nodes]))
            graph = build_rgg(sample_uniform(manifold, num_nodes, rng), eps, manifold, accelerate=True)
            stats.append(ratio_statistics(graph, manifold))
    cio.write_csv(args.out, cio.RATIO_COLUMNS, [tuple(getattr(s, c) for c in cio.RATIO_COLUMNS) for s in stats])
    return EXIT_OK


def cmd_validate(args) -> int:
    from curvlab.validate import run_battery

    results = run_battery(seed=args.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    if args.out:
        cio.write_csv(args.out, ("check", "passed", "detail"), [(r.name, r.passed, r.detail) for r in results])
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


COMMANDS = {
    "generate": cmd_generate,
    "curvature": cmd_curvature,
    "sweep": cmd_sweep,
    "ratio": cmd_ratio,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as err:
        print(f"curvlab {args.command}: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except cio.GraphFormatError as err:
        print(f"curvlab {args.command}: error: {err}", file=sys.stderr)
        return EXIT_IO
    except OSError as err:
        print(f"curvlab {args.command}: I/O error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
