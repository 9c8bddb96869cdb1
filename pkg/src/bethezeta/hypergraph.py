"""Factor hypergraphs, their directed-edge structure and cycle combinatorics.

A hypergraph ``H = (V, F)`` is stored together with the derived set of
directed edges: one edge per incidence ``(factor, vertex)``.  For an edge
``e`` the factor is its start ``s(e)`` and the vertex its terminus ``t(e)``.
Two edges are in the feed relation ``e -> e'`` when ``t(e)`` belongs to
``s(e')``, the termini differ and the start factors differ.  The last
condition is what makes walks in the feed relation non-backtracking: a
message never feeds back into the factor it came from.  All orderings are
deterministic so derived matrices are reproducible bit for bit.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np


class GraphStructureError(ValueError):
    """Raised for malformed vertex/factor input."""


@dataclass(frozen=True)
class PrimeCycle:
    """Equivalence class of a prime closed geodesic.

    ``edges`` holds directed-edge indices in the lexicographically
    smallest rotation, so two equivalent geodesics compare equal.
    """

    edges: tuple

    def __len__(self):
        return len(self.edges)


class FactorGraph:
    """Immutable factor hypergraph with derived directed-edge structure.

    Use :func:`build_factor_graph`; the constructor performs the full
    validation either way.  Vertices and factor members keep the caller's
    ids, every derived structure is indexed by position.
    """

    def __init__(self, vertices, factors):
        self.vertices = tuple(vertices)
        if len(set(self.vertices)) != len(self.vertices):
            raise GraphStructureError("duplicate vertex id")
        self._vidx = {v: i for i, v in enumerate(self.vertices)}
        members = []
        for fi, mem in enumerate(factors):
            mem = tuple(mem)
            if not mem:
                raise GraphStructureError("factor %d is empty" % fi)
            if len(set(mem)) != len(mem):
                raise GraphStructureError(
                    "factor %d repeats a vertex: %r" % (fi, mem)
                )
            for v in mem:
                if v not in self._vidx:
                    raise GraphStructureError(
                        "factor %d uses unknown vertex id %r" % (fi, v)
                    )
            members.append(tuple(self._vidx[v] for v in mem))
        self.factors = tuple(tuple(f) for f in factors)
        self.factor_members = tuple(members)

        # Directed edges in factor order, then member order.
        edges = []
        for fi, mem in enumerate(self.factor_members):
            for vi in mem:
                edges.append((fi, vi))
        self.directed_edges = tuple(edges)
        self.edge_index = {e: k for k, e in enumerate(edges)}
        vfac = [[] for _ in self.vertices]
        for fi, mem in enumerate(self.factor_members):
            for vi in mem:
                vfac[vi].append(fi)
        self.vertex_factors = tuple(tuple(fs) for fs in vfac)
        self.vertex_degree = tuple(len(fs) for fs in vfac)
        self.factor_degree = tuple(len(m) for m in self.factor_members)

        # feeders[e] = all e' with e' -> e, grouped by the source vertex
        # t(e') running over the members of s(e).
        feeders = []
        for fi, vi in self.directed_edges:
            into = []
            for vj in self.factor_members[fi]:
                if vj == vi:
                    continue
                for fj in self.vertex_factors[vj]:
                    if fj == fi:
                        continue
                    into.append(self.edge_index[(fj, vj)])
            feeders.append(tuple(into))
        self.feeders = tuple(feeders)
        succ = [[] for _ in self.directed_edges]
        for e, into in enumerate(self.feeders):
            for e2 in into:
                succ[e2].append(e)
        self.successors = tuple(tuple(sorted(s)) for s in succ)

    # -- basic accessors ------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_factors(self):
        return len(self.factors)

    @property
    def n_edges(self):
        return len(self.directed_edges)

    def vertex_position(self, vid):
        return self._vidx[vid]

    def edges_of_factor(self, fi):
        """Directed-edge indices (alpha -> i) for i running over alpha."""
        mem = self.factor_members[fi]
        return tuple(self.edge_index[(fi, vi)] for vi in mem)

    def edges_at_vertex(self, vi):
        return tuple(
            self.edge_index[(fi, vi)] for fi in self.vertex_factors[vi]
        )

    def is_pairwise(self):
        return all(d == 2 for d in self.factor_degree)

    def __repr__(self):
        return "FactorGraph(|V|=%d, |F|=%d, |E>|=%d)" % (
            self.n_vertices,
            self.n_factors,
            self.n_edges,
        )


def build_factor_graph(vertex_ids, factor_member_lists):
    """Build a :class:`FactorGraph` from ids and factor member lists."""
    return FactorGraph(vertex_ids, factor_member_lists)


# ---------------------------------------------------------------------------
# bipartite representation and invariants


def _bipartite_adjacency(g):
    """Adjacency lists of the bipartite graph on V + F nodes.

    Vertex i is node i, factor alpha is node |V| + alpha; one undirected
    edge per directed edge of the hypergraph (parallel edges possible for
    multigraphs, which only matters for Laplacian counts below).
    """
    n = g.n_vertices + g.n_factors
    adj = [[] for _ in range(n)]
    for fi, vi in g.directed_edges:
        adj[vi].append(g.n_vertices + fi)
        adj[g.n_vertices + fi].append(vi)
    return adj


def connected_components(g):
    """Number of connected components of the bipartite representation."""
    adj = _bipartite_adjacency(g)
    n = len(adj)
    seen = [False] * n
    comps = 0
    for start in range(n):
        if seen[start]:
            continue
        comps += 1
        stack = [start]
        seen[start] = True
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
    return comps


def nullity(g):
    """Cycle rank |E>| - |V| - |F| + k of the bipartite representation.

    Zero together with a single component characterizes trees.
    """
    return g.n_edges - g.n_vertices - g.n_factors + connected_components(g)


def euler_number(g):
    """chi(H) = |V| + |F| - |E>|."""
    return g.n_vertices + g.n_factors - g.n_edges


def is_tree(g):
    return nullity(g) == 0 and connected_components(g) == 1


# ---------------------------------------------------------------------------
# feed relation and prime cycles


def feed_pairs(g):
    """All ordered pairs (e, e') with e -> e', sorted by (e, e')."""
    pairs = []
    for e_to, into in enumerate(g.feeders):
        for e_from in into:
            pairs.append((e_from, e_to))
    pairs.sort()
    return pairs


def _canonical_rotation(seq):
    n = len(seq)
    best = None
    for s in range(n):
        rot = seq[s:] + seq[:s]
        if best is None or rot < best:
            best = rot
    return best


def _minimal_period(seq):
    n = len(seq)
    for p in range(1, n + 1):
        if n % p:
            continue
        if all(seq[i] == seq[i % p] for i in range(n)):
            return p
    return n


def prime_cycles(g, max_len):
    """All prime cycles of length <= max_len, one canonical class each.

    Closed geodesics are closed walks in the feed relation; they may
    revisit edges, so this is a walk enumeration, not a simple-cycle
    search.  Starting each walk at its minimal directed edge bounds the
    search; rotations through repeated minimal edges are removed by
    canonicalization and m-multiples by the period test.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    found = set()
    n_edges = g.n_edges
    for start in range(n_edges):
        stack = [(start,)]
        while stack:
            path = stack.pop()
            last = path[-1]
            for nxt in g.successors[last]:
                if nxt < start:
                    continue
                if nxt == start:
                    found.add(_canonical_rotation(path))
                if len(path) < max_len:
                    stack.append(path + (nxt,))
    cycles = [
        PrimeCycle(seq)
        for seq in found
        if _minimal_period(seq) == len(seq)
    ]
    cycles.sort(key=lambda c: (len(c.edges), c.edges))
    return cycles


# ---------------------------------------------------------------------------
# spanning tree counts (matrix-tree theorem)


def _laplacian_tree_count(n_nodes, edge_list):
    if n_nodes == 1:
        return 1
    lap = np.zeros((n_nodes, n_nodes))
    for a, b in edge_list:
        lap[a, a] += 1.0
        lap[b, b] += 1.0
        lap[a, b] -= 1.0
        lap[b, a] -= 1.0
    minor = lap[1:, 1:]
    return int(round(np.linalg.det(minor)))


def spanning_tree_count_bipartite(g):
    """kappa(B_H): spanning trees of the bipartite representation."""
    if connected_components(g) != 1:
        raise GraphStructureError("spanning tree count needs a connected graph")
    edges = [(vi, g.n_vertices + fi) for fi, vi in g.directed_edges]
    return _laplacian_tree_count(g.n_vertices + g.n_factors, edges)


def spanning_tree_count_graph(g):
    """kappa(G) for a pairwise hypergraph, on the collapsed graph G."""
    if not g.is_pairwise():
        raise GraphStructureError("graph spanning-tree count needs degree-2 factors")
    if connected_components(g) != 1:
        raise GraphStructureError("spanning tree count needs a connected graph")
    edges = [tuple(mem) for mem in g.factor_members]
    return _laplacian_tree_count(g.n_vertices, edges)


# ---------------------------------------------------------------------------
# stock graphs used across tests and experiments


def cycle_graph(n):
    """Pairwise cycle C_n (n >= 3)."""
    verts = list(range(n))
    facs = [(i, (i + 1) % n) for i in range(n)]
    return FactorGraph(verts, facs)


def path_graph(n):
    verts = list(range(n))
    facs = [(i, i + 1) for i in range(n - 1)]
    return FactorGraph(verts, facs)


def complete_graph(n):
    verts = list(range(n))
    facs = list(combinations(range(n), 2))
    return FactorGraph(verts, facs)


def star_graph(n_leaves):
    verts = list(range(n_leaves + 1))
    facs = [(0, i) for i in range(1, n_leaves + 1)]
    return FactorGraph(verts, facs)


def complete_bipartite_graph(m, n):
    verts = list(range(m + n))
    facs = [(a, m + b) for a in range(m) for b in range(n)]
    return FactorGraph(verts, facs)


def torus_graph(rows, cols):
    """Pairwise grid with cyclic boundary; rows, cols >= 2.

    A 2xN or Nx2 torus has parallel edges, represented as distinct
    degree-2 factors over the same vertex pair.
    """
    if rows < 2 or cols < 2:
        raise GraphStructureError("torus needs rows, cols >= 2")
    verts = [(r, c) for r in range(rows) for c in range(cols)]
    facs = []
    for r in range(rows):
        for c in range(cols):
            facs.append(((r, c), (r, (c + 1) % cols)))
            facs.append((((r, c)), ((r + 1) % rows, c)))
    return FactorGraph(verts, facs)


def grid_edge_torus_graph(rows, cols):
    """Toroidal grid with variables on grid edges, factors on grid sites.

    Each site factor contains its four incident edge variables, so factor
    degrees are four and variable degrees two.
    """
    if rows < 2 or cols < 2:
        raise GraphStructureError("torus needs rows, cols >= 2")
    hedges = [("h", r, c) for r in range(rows) for c in range(cols)]
    vedges = [("v", r, c) for r in range(rows) for c in range(cols)]
    verts = hedges + vedges
    facs = []
    for r in range(rows):
        for c in range(cols):
            facs.append(
                (
                    ("h", r, c),
                    ("h", r, (c - 1) % cols),
                    ("v", r, c),
                    ("v", (r - 1) % rows, c),
                )
            )
    return FactorGraph(verts, facs)
