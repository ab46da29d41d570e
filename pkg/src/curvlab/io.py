"""Graph files and CSV reports.

Floats are written with 17 significant digits so every value round-trips.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from curvlab.geometry import make_manifold
from curvlab.rgg import GeometricGraph, graph_from_edges

__all__ = [
    "GraphFormatError",
    "fmt",
    "graph_to_json",
    "write_graph",
    "read_graph",
    "read_edge_list",
    "write_csv",
    "csv_text",
    "EDGE_COLUMNS",
    "NODE_COLUMNS",
    "RATIO_COLUMNS",
    "PROFILE_COLUMNS",
]

EDGE_COLUMNS = ("i", "j", "weight", "w1", "kappa", "status")
NODE_COLUMNS = ("node", "degree", "sorc", "scaled_sorc", "src", "scaled_src", "undefined_edges")
RATIO_COLUMNS = ("n", "N", "epsilon", "sample_count", "empirical_mean", "target_mean", "ks_distance")
PROFILE_COLUMNS = ("bin", "ratio_lo", "ratio_hi", "count", "mean_abs_error", "mean_scaled_kappa")


class GraphFormatError(ValueError):
    """Malformed graph file; the message names the offending record."""


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(value)


def graph_to_json(graph: GeometricGraph) -> str:
    header = {
        "manifold": graph.manifold.kind if graph.manifold is not None else None,
        "dim": graph.n_intrinsic,
        "sides": list(graph.manifold.side_lengths) if getattr(graph.manifold, "side_lengths", None) else None,
        "N": graph.num_nodes,
        "epsilon": graph.epsilon,
        "seed": graph.seed,
    }
    head = ", ".join(
        f"{json.dumps(k)}: {fmt(v) if isinstance(v, float) else json.dumps(v)}"
        for k, v in header.items()
    )
    lines = ["{", f'"header": {{{head}}},', '"nodes": [']
    if graph.points is not None:
        rows = ["[" + ", ".join(fmt(c) for c in p) + "]" for p in graph.points.tolist()]
        lines.append(",\n".join(rows))
    lines.append("],")
    lines.append('"edges": [')
    i, j, w = graph.edges()
    lines.append(",\n".join(f"[{a}, {b}, {fmt(c)}]" for a, b, c in zip(i.tolist(), j.tolist(), w.tolist())))
    lines.append("]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_graph(graph: GeometricGraph, path) -> None:
    Path(path).write_text(graph_to_json(graph))


def _require(cond, msg):
    if not cond:
        raise GraphFormatError(msg)


def read_graph(path) -> GeometricGraph:
    """Parse a graph JSON file written by :func:`write_graph`.

    Raises:
        GraphFormatError: naming the first malformed record.
        OSError: if the file cannot be read.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise GraphFormatError(f"{path}: invalid JSON at line {err.lineno}: {err.msg}") from err
    _require(isinstance(doc, dict), f"{path}: top level must be an object")
    header = doc.get("header")
    _require(isinstance(header, dict), f"{path}: missing header object")
    for key in ("dim", "N", "epsilon"):
        _require(key in header, f"{path}: header lacks {key!r}")
    num_nodes = header["N"]
    _require(isinstance(num_nodes, int) and num_nodes >= 0, f"{path}: header N must be a nonnegative integer")
    eps = header["epsilon"]
    _require(isinstance(eps, (int, float)) and eps > 0, f"{path}: header epsilon must be positive")
    dim = header["dim"]
    _require(isinstance(dim, int) and dim >= 2, f"{path}: header dim must be an integer >= 2")

    manifold = None
    if header.get("manifold") is not None:
        try:
            manifold = make_manifold(header["manifold"], dim, header.get("sides"))
        except ValueError as err:
            raise GraphFormatError(f"{path}: header: {err}") from err

    nodes = doc.get("nodes", [])
    _require(isinstance(nodes, list), f"{path}: nodes must be an array")
    points = None
    if nodes:
        _require(len(nodes) == num_nodes, f"{path}: header N={num_nodes} but {len(nodes)} node rows")
        width = manifold.ambient_dim if manifold is not None else len(nodes[0])
        for k, row in enumerate(nodes):
            _require(
                isinstance(row, list) and len(row) == width
                and all(isinstance(c, (int, float)) and math.isfinite(c) for c in row),
                f"{path}: node record {k} malformed: {row!r}",
            )
        points = np.array(nodes, dtype=float).reshape(num_nodes, width)

    edges = doc.get("edges")
    _require(isinstance(edges, list), f"{path}: edges must be an array")
    seen = set()
    for k, rec in enumerate(edges):
        ok = (
            isinstance(rec, list) and len(rec) == 3
            and isinstance(rec[0], int) and isinstance(rec[1], int)
            and isinstance(rec[2], (int, float))
        )
        _require(ok, f"{path}: edge record {k} malformed: {rec!r}")
        a, b, w = rec
        _require(0 <= a < b < num_nodes, f"{path}: edge record {k} needs 0 <= i < j < N: {rec!r}")
        _require(math.isfinite(w) and w > 0, f"{path}: edge record {k} has nonpositive weight: {rec!r}")
        _require((a, b) not in seen, f"{path}: edge record {k} duplicates ({a}, {b})")
        seen.add((a, b))
    return graph_from_edges(num_nodes, edges, epsilon=float(eps), n_intrinsic=dim, points=points,
                            manifold=manifold, seed=header.get("seed"))


def read_edge_list(path) -> tuple[int, list[tuple[int, int, float]]]:
    """Read ``i,j,w`` rows (header optional). Node count is ``max id + 1``."""
    edges = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#"):
                continue
            if lineno == 1 and not row[0].strip().lstrip("-").isdigit():
                continue
            try:
                i, j, w = int(row[0]), int(row[1]), float(row[2])
            except (ValueError, IndexError) as err:
                raise GraphFormatError(f"{path}: line {lineno} malformed: {row!r}") from err
            if i < 0 or j < 0 or i == j:
                raise GraphFormatError(f"{path}: line {lineno} has invalid endpoints: {row!r}")
            edges.append((i, j, w))
    num_nodes = 1 + max((max(i, j) for i, j, _ in edges), default=-1)
    return num_nodes, edges


def csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    out = [",".join(columns)]
    for row in rows:
        out.append(",".join(fmt(v) for v in row))
    return "\n".join(out) + "\n"


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    Path(path).write_text(csv_text(columns, rows))
