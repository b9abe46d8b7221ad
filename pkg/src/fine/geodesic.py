"""Geodesic approximation: shortest paths through a neighbour graph whose
edges carry local dissimilarities."""

import csv
import heapq
import logging
import math
from dataclasses import dataclass

import numpy as np

from ._util import fmt, ordered_map
from .divergence import DissimilarityMatrix
from .errors import DisconnectedGraphError, InvalidParameterError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NeighborGraph:
    """Undirected weighted graph; each edge is stored once as (i, j, w), i < j."""

    n_nodes: int
    edges: tuple
    k: int
    connected: bool
    ids: tuple = ()
    metric: str = "fisher_kl"
    added_edges: int = 0

    def adjacency(self):
        adj = [[] for _ in range(self.n_nodes)]
        for i, j, w in self.edges:
            adj[i].append((j, w))
            adj[j].append((i, w))
        return adj

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["i", "j", "weight"])
            for i, j, w in self.edges:
                wr.writerow([i, j, fmt(w)])


def default_k(n):
    """max(3, ceil(log2 n)), capped at n - 1."""
    k = max(3, math.ceil(math.log2(n))) if n > 1 else 1
    return max(1, min(k, n - 1))


def _components(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j, _ in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    return [find(a) for a in range(n)]


def _values(D):
    return D.values if isinstance(D, DissimilarityMatrix) else np.asarray(D, dtype=float)


def build_neighbor_graph(D, k):
    """Symmetric-union k-nearest-neighbour graph on a dissimilarity matrix.

    Edge (i, j) exists when j is among the k smallest entries of row i or i
    among the k smallest of row j. Ties go to the lower index.
    """
    v = _values(D)
    n = v.shape[0]
    if not 1 <= k <= n - 1:
        raise InvalidParameterError(f"k = {k} outside [1, {n - 1}]")
    idx = np.arange(n)
    chosen = set()
    for i in range(n):
        order = np.lexsort((idx, v[i]))
        picked = 0
        for j in order:
            if j == i:
                continue
            chosen.add((min(i, int(j)), max(i, int(j))))
            picked += 1
            if picked == k:
                break
    edges = tuple((i, j, float(v[i, j])) for i, j in sorted(chosen))
    roots = _components(n, edges)
    meta = {}
    if isinstance(D, DissimilarityMatrix):
        meta = {"ids": D.ids, "metric": D.metric}
    return NeighborGraph(n, edges, k, len(set(roots)) == 1, **meta)


def ensure_connected(g, D):
    """Bridge the components of ``g`` with the cheapest inter-component edges.

    Kruskal over the contracted components: candidate pairs in increasing
    (weight, i, j) order, each added only if it joins two still-separate
    components. Adds exactly c - 1 edges for c components.
    """
    roots = _components(g.n_nodes, g.edges)
    if len(set(roots)) == 1:
        return g
    v = _values(D)
    n = g.n_nodes
    iu, ju = np.triu_indices(n, k=1)
    r = np.asarray(roots)
    cross = r[iu] != r[ju]
    iu, ju = iu[cross], ju[cross]
    w = v[iu, ju]
    order = np.lexsort((ju, iu, w))
    parent = {r: r for r in set(roots)}

    def find(a):
        while parent[a] != a:
            a = parent[a]
        return a

    added = []
    need = len(parent) - 1
    for o in order:
        a, b = int(iu[o]), int(ju[o])
        ra, rb = find(roots[a]), find(roots[b])
        if ra == rb:
            continue
        parent[max(ra, rb)] = min(ra, rb)
        added.append((a, b, float(w[o])))
        if len(added) == need:
            break
    log.warning("neighbour graph had %d components; added %d bridging edges",
                need + 1, len(added))
    edges = tuple(sorted(g.edges + tuple(added)))
    return NeighborGraph(n, edges, g.k, True, g.ids, g.metric, g.added_edges + len(added))


def shortest_path_lengths(g, source, adj=None):
    """Single-source shortest-path lengths (binary-heap Dijkstra).

    Unreachable nodes get ``inf``. Lengths are accumulated from the source
    outwards along each path.
    """
    adj = adj if adj is not None else g.adjacency()
    dist = [math.inf] * g.n_nodes
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = [False] * g.n_nodes
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, w in adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return np.array(dist)


def geodesic_distances(g, parallel=False):
    """All-pairs shortest-path lengths as a DissimilarityMatrix.

    Entry (i, j) with i < j comes from the run sourced at i and is mirrored,
    so the output is exactly symmetric.
    """
    if _components(g.n_nodes, g.edges).count(0) != g.n_nodes:
        raise DisconnectedGraphError("neighbour graph is not connected")
    adj = g.adjacency()
    rows = ordered_map(lambda s: shortest_path_lengths(g, s, adj), range(g.n_nodes), parallel)
    n = g.n_nodes
    out = np.zeros((n, n))
    for i, r in enumerate(rows):
        out[i, i + 1:] = r[i + 1:]
        out[i + 1:, i] = r[i + 1:]
    ids = g.ids if g.ids else tuple(str(i) for i in range(n))
    return DissimilarityMatrix(out, g.metric, ids, {"bridged_edges": g.added_edges})
