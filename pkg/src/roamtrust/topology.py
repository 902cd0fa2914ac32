"""Site graphs: the discretized environments robots walk on.

A site graph is undirected and connected. Robots may always stay where they
are, so self-loops are implicit at every site and are never stored in the
edge set; the transition kernel accounts for the self-transition mass.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ER_RESAMPLE_CAP = 10_000


class TopologyError(ValueError):
    """Raised for invalid construction parameters or non-connected graphs."""


@dataclass(frozen=True)
class SiteGraph:
    """Undirected connected graph of sites, 0-indexed.

    ``edges`` holds unordered non-self pairs ``(a, b)`` with ``a < b``;
    ``adjacency[s]`` lists the distinct non-self neighbors of site ``s`` in
    ascending order.
    """

    num_sites: int
    edges: frozenset[tuple[int, int]]
    adjacency: tuple[tuple[int, ...], ...] = field(repr=False)

    def degree(self, site: int) -> int:
        """Number of non-self neighbors of ``site``."""
        return len(self.adjacency[site])

    def distance_matrix(self) -> np.ndarray:
        """All-pairs shortest-path hop counts (BFS from every site)."""
        n = self.num_sites
        dist = np.full((n, n), -1, dtype=np.int64)
        for src in range(n):
            dist[src, src] = 0
            frontier = [src]
            d = 0
            while frontier:
                d += 1
                nxt = []
                for s in frontier:
                    for t in self.adjacency[s]:
                        if dist[src, t] < 0:
                            dist[src, t] = d
                            nxt.append(t)
                frontier = nxt
        return dist


def _make_graph(num_sites: int, edge_pairs) -> SiteGraph:
    edges = set()
    for a, b in edge_pairs:
        a, b = int(a), int(b)
        if a == b:
            continue  # self-loops are implicit
        if not (0 <= a < num_sites and 0 <= b < num_sites):
            raise TopologyError(f"edge ({a}, {b}) references a site outside 0..{num_sites - 1}")
        edges.add((min(a, b), max(a, b)))
    adj: list[list[int]] = [[] for _ in range(num_sites)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    graph = SiteGraph(num_sites, frozenset(edges), tuple(tuple(sorted(n)) for n in adj))
    if not is_connected(graph):
        raise TopologyError("graph is not connected")
    return graph


def is_connected(graph: SiteGraph) -> bool:
    """Breadth-first reachability of every site from site 0."""
    if graph.num_sites == 1:
        return True
    seen = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for s in frontier:
            for t in graph.adjacency[s]:
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        frontier = nxt
    return len(seen) == graph.num_sites


def grid(rows: int, cols: int) -> SiteGraph:
    """Rook-adjacency grid (4-connected, no diagonals), row-major site ids."""
    if rows < 1 or cols < 1:
        raise TopologyError("grid dimensions must be >= 1")
    edges = []
    for r in range(rows):
        for c in range(cols):
            s = r * cols + c
            if c + 1 < cols:
                edges.append((s, s + 1))
            if r + 1 < rows:
                edges.append((s, s + cols))
    return _make_graph(rows * cols, edges)


def line(n: int) -> SiteGraph:
    """Path graph on ``n`` sites; ``line(1)`` is the single-site graph."""
    if n < 1:
        raise TopologyError("line length must be >= 1")
    return _make_graph(n, [(i, i + 1) for i in range(n - 1)])


def barabasi_albert(n: int, k: int, rng: np.random.Generator) -> SiteGraph:
    """Random graph grown by uniform attachment.

    The first ``k`` sites start connected in a line; every later site
    attaches to ``min(k, #existing)`` distinct existing sites chosen
    uniformly without replacement. Connected by construction.
    """
    if n < 1:
        raise TopologyError("n must be >= 1")
    if not (1 <= k < n):
        raise TopologyError("require 1 <= k < n")
    edges = [(i, i + 1) for i in range(k - 1)]
    for new in range(k, n):
        targets = rng.choice(new, size=min(k, new), replace=False)
        edges.extend((int(t), new) for t in targets)
    return _make_graph(n, edges)


def erdos_renyi(n: int, p: float, rng: np.random.Generator) -> SiteGraph:
    """G(n, p) resampled from the same stream until connected.

    The protocol guarantees assume connectivity, so disconnected draws are
    rejected; gives up after ER_RESAMPLE_CAP attempts.
    """
    if n < 1:
        raise TopologyError("n must be >= 1")
    if not (0.0 < p <= 1.0):
        raise TopologyError("require 0 < p <= 1")
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    for _ in range(ER_RESAMPLE_CAP):
        draws = rng.random(len(pairs))
        edges = [pair for pair, u in zip(pairs, draws) if u < p]
        try:
            return _make_graph(n, edges)
        except TopologyError:
            continue
    raise TopologyError(f"no connected G({n}, {p}) draw within {ER_RESAMPLE_CAP} attempts")


def explicit(edge_list, num_sites: int | None = None) -> SiteGraph:
    """Graph from an explicit edge list; must come out connected."""
    edge_list = [(int(a), int(b)) for a, b in edge_list]
    if num_sites is None:
        if not edge_list:
            raise TopologyError("empty edge list: pass num_sites=1 for the single-site graph")
        num_sites = max(max(a, b) for a, b in edge_list) + 1
    return _make_graph(num_sites, edge_list)


def build_topology(kind: str, rng: np.random.Generator | None = None, **params) -> SiteGraph:
    """Dispatch on topology kind.

    Kinds and parameters: ``grid(rows, cols)``, ``line(n)``,
    ``barabasi_albert(n, k)``, ``erdos_renyi(n, p)``,
    ``explicit(edge_list[, num_sites])``. Random kinds require ``rng``.
    """
    if kind == "grid":
        return grid(params["rows"], params["cols"])
    if kind == "line":
        return line(params["n"])
    if kind == "barabasi_albert":
        if rng is None:
            raise TopologyError("barabasi_albert requires an rng")
        return barabasi_albert(params["n"], params["k"], rng)
    if kind == "erdos_renyi":
        if rng is None:
            raise TopologyError("erdos_renyi requires an rng")
        return erdos_renyi(params["n"], params["p"], rng)
    if kind == "explicit":
        return explicit(params["edge_list"], params.get("num_sites"))
    raise TopologyError(f"unknown topology kind {kind!r}")


def parse_edge_list(text: str) -> list[tuple[int, int]]:
    """Parse the edge-list text format: one ``a b`` pair per line, 0-indexed,
    ``#`` starts a comment."""
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        parts = stripped.split()
        if len(parts) != 2:
            raise TopologyError(f"line {lineno}: expected two site ids, got {raw!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return edges


def format_edge_list(graph: SiteGraph) -> str:
    """Render a graph in the edge-list text format."""
    lines = [f"# sites: {graph.num_sites}"]
    lines.extend(f"{a} {b}" for a, b in sorted(graph.edges))
    return "\n".join(lines) + "\n"
