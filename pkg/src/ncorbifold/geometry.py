"""Metric graphs standing in for compact manifolds, isometric actions, G-paths
and the orbifold (orbit-space) geodesic distance."""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .groups import GroupAction, trivial_action


class GeometryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MetricGraph:
    """Simple connected graph on ``0..n_vertices-1`` with positive edge lengths."""

    n_vertices: int
    edges: dict  # frozenset({u, v}) -> length
    require_connected: bool = True
    adjacency: list = field(init=False, repr=False)

    def __post_init__(self):
        edges = {}
        for key, length in dict(self.edges).items():
            pair = tuple(sorted(key))
            if len(pair) != 2 or pair[0] == pair[1]:
                raise GeometryError(f"self-loop or malformed edge {tuple(key)}")
            u, v = pair
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise GeometryError(f"edge {pair} references a missing vertex")
            if not length > 0:
                raise GeometryError(f"edge {pair} has non-positive length {length}")
            edges[frozenset(pair)] = float(length)
        object.__setattr__(self, "edges", edges)
        adj = [dict() for _ in range(self.n_vertices)]
        for key, length in edges.items():
            u, v = sorted(key)
            adj[u][v] = length
            adj[v][u] = length
        object.__setattr__(self, "adjacency", adj)
        if self.require_connected and not self.is_connected:
            raise GeometryError("graph is not connected")

    @classmethod
    def from_edge_list(cls, n_vertices, edge_list, require_connected=True):
        edges = {}
        for u, v, length in edge_list:
            key = frozenset((int(u), int(v)))
            if key in edges:
                raise GeometryError(f"duplicate edge {(u, v)}")
            edges[key] = length
        return cls(n_vertices, edges, require_connected)

    @property
    def vertices(self) -> range:
        return range(self.n_vertices)

    @property
    def is_connected(self) -> bool:
        if self.n_vertices == 0:
            return True
        seen, stack = {0}, [0]
        while stack:
            u = stack.pop()
            for v in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n_vertices

    def neighbors(self, u: int) -> list[int]:
        return sorted(self.adjacency[u])

    def length(self, u: int, v: int) -> float:
        return self.adjacency[u][v]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency[u]

    def edge_list(self) -> list[tuple[int, int, float]]:
        return sorted((*sorted(k), l) for k, l in self.edges.items())

    @property
    def total_length(self) -> float:
        return float(sum(self.edges.values()))

    def vertex_volumes(self) -> np.ndarray:
        """Half the total length of incident edges (equals h on a uniform cycle)."""
        vol = np.zeros(self.n_vertices)
        for key, length in self.edges.items():
            for u in key:
                vol[u] += 0.5 * length
        return vol

    def reweighted(self, weights: dict) -> "MetricGraph":
        return MetricGraph(self.n_vertices, {k: weights[k] for k in self.edges}, self.require_connected)

    def cycle_order(self):
        """Return h if the graph is the cycle 0-1-...-(n-1)-0 with uniform edge length h, else None."""
        n = self.n_vertices
        if n < 3 or len(self.edges) != n:
            return None
        lengths = set()
        for j in range(n):
            key = frozenset((j, (j + 1) % n))
            if key not in self.edges:
                return None
            lengths.add(self.edges[key])
        lo, hi = min(lengths), max(lengths)
        return lo if hi - lo <= 1e-12 * hi else None


def refine_circle(n: int, circumference: float) -> MetricGraph:
    if n < 3:
        raise GeometryError(f"a cycle needs at least 3 vertices, got {n}")
    if not circumference > 0:
        raise GeometryError("circumference must be positive")
    h = circumference / n
    return MetricGraph(n, {frozenset((j, (j + 1) % n)): h for j in range(n)})


def torus_graph(n: int, m: int, lx: float, ly: float) -> MetricGraph:
    """Periodic n x m grid; vertex (i, j) has id i*m + j."""
    edges = {}
    for i in range(n):
        for j in range(m):
            v = i * m + j
            edges[frozenset((v, ((i + 1) % n) * m + j))] = lx / n
            edges[frozenset((v, i * m + (j + 1) % m))] = ly / m
    return MetricGraph(n * m, edges)


def dijkstra(graph: MetricGraph, source: int) -> np.ndarray:
    """Single-source shortest paths with a binary heap; ties go to the smaller vertex id."""
    dist = np.full(graph.n_vertices, math.inf)
    dist[source] = 0.0
    heap = [(0.0, source)]
    done = np.zeros(graph.n_vertices, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, length in sorted(graph.adjacency[u].items()):
            nd = d + length
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def all_pairs_distances(graph: MetricGraph) -> np.ndarray:
    return np.stack([dijkstra(graph, s) for s in graph.vertices])


@dataclass(frozen=True, eq=False)
class DiscreteOrbifold:
    graph: MetricGraph
    action: GroupAction

    def __post_init__(self):
        if self.action.n_points != self.graph.n_vertices:
            raise GeometryError(
                f"action on {self.action.n_points} points does not match {self.graph.n_vertices} vertices"
            )
        for g in self.action.group.elements:
            for key, length in self.graph.edges.items():
                u, v = sorted(key)
                gu, gv = self.action.act(g, u), self.action.act(g, v)
                if not self.graph.has_edge(gu, gv):
                    raise GeometryError(f"element {g} maps edge {(u, v)} to non-edge {(gu, gv)}")
                if abs(self.graph.length(gu, gv) - length) > 1e-12 * length:
                    raise GeometryError(f"element {g} does not preserve the length of edge {(u, v)}")

    @property
    def group(self):
        return self.action.group


def trivial_orbifold(graph: MetricGraph) -> DiscreteOrbifold:
    return DiscreteOrbifold(graph, trivial_action(graph.n_vertices))


@dataclass(frozen=True)
class GPath:
    """Edge paths ``segments[i]`` joined by arrows ``junctions[i] = (g, x)``.

    Validity: the last vertex of segment i equals g_i applied to the first vertex of
    segment i+1, and the arrow's source is that first vertex.
    """

    segments: tuple
    junctions: tuple = ()


def validate_gpath(orb: DiscreteOrbifold, path: GPath) -> None:
    if len(path.segments) != len(path.junctions) + 1:
        raise GeometryError("a G-path with k segments needs k-1 junction arrows")
    for i, seg in enumerate(path.segments):
        if len(seg) == 0:
            raise GeometryError(f"segment {i} is empty")
        for u, v in zip(seg[:-1], seg[1:]):
            if not orb.graph.has_edge(u, v):
                raise GeometryError(f"segment {i} uses non-edge {(u, v)}")
    for i, (g, x) in enumerate(path.junctions):
        start = path.segments[i + 1][0]
        if x != start or orb.action.act(g, start) != path.segments[i][-1]:
            raise GeometryError(f"junction {i}: arrow {(g, x)} does not join the adjacent segments")


def gpath_length(orb: DiscreteOrbifold, path: GPath) -> float:
    validate_gpath(orb, path)
    return float(
        sum(orb.graph.length(u, v) for seg in path.segments for u, v in zip(seg[:-1], seg[1:]))
    )


def quotient_graph(orb: DiscreteOrbifold) -> tuple[MetricGraph, np.ndarray]:
    """Orbit graph (orbits ordered by smallest member) with edge lengths minimized over representatives.

    Edges inside a single orbit are dropped. Returns the graph and the vertex -> orbit map.
    """
    proj = orb.action.orbit_index()
    n_orb = int(proj.max()) + 1
    edges = {}
    for key, length in orb.graph.edges.items():
        u, v = sorted(key)
        a, b = int(proj[u]), int(proj[v])
        if a == b:
            continue
        k = frozenset((a, b))
        edges[k] = min(edges.get(k, math.inf), length)
    return MetricGraph(n_orb, edges, orb.graph.require_connected), proj


def orbifold_distance_min(orb: DiscreteOrbifold, x: int, xp: int) -> float:
    d = dijkstra(orb.graph, x)
    return float(min(d[orb.action.act(g, xp)] for g in orb.group.elements))


def orbifold_distance_quotient(orb: DiscreteOrbifold, x: int, xp: int) -> float:
    q, proj = quotient_graph(orb)
    return float(dijkstra(q, int(proj[x]))[proj[xp]])


def orbifold_distance(orb: DiscreteOrbifold, x: int, xp: int) -> float:
    """Orbit-space geodesic distance between [x] and [x'].

    Computed both as min_g d(x, g.x') and on the quotient graph; the two must agree.
    """
    n = orb.graph.n_vertices
    if not (0 <= x < n and 0 <= xp < n):
        raise GeometryError(f"vertices {(x, xp)} are not in the graph")
    if not orb.graph.is_connected:
        raise GeometryError("orbifold distance needs a connected graph")
    a = orbifold_distance_min(orb, x, xp)
    b = orbifold_distance_quotient(orb, x, xp)
    if abs(a - b) > 1e-9 * max(1.0, a):
        raise GeometryError(f"min-over-g ({a}) and quotient ({b}) distances disagree")
    return a


def orbit_distance(orb: DiscreteOrbifold, orbit_a: int, orbit_b: int) -> float:
    """Same metric, indexed by orbit ids (the order used by quotient_graph)."""
    orbits = orb.action.orbits()
    return orbifold_distance(orb, orbits[orbit_a][0], orbits[orbit_b][0])


def orbifold_distance_table(orb: DiscreteOrbifold) -> np.ndarray:
    """All-pairs orbit-space distances via min over g (vectorized)."""
    d = all_pairs_distances(orb.graph)
    act = orb.action.table
    return np.min(d[:, act.T], axis=2)


def brute_force_gpath_distance(orb: DiscreteOrbifold, x: int, xp: int, max_junctions: int = 3) -> float:
    """Infimum of G-path lengths with at most ``max_junctions`` junctions, by explicit enumeration.

    Each segment is a shortest edge path, and every junction arrow is tried, so the search
    covers all G-paths up to the junction bound. Exponential; meant for small graphs.
    """
    d = all_pairs_distances(orb.graph)
    G, act = orb.group, orb.action.table
    n = orb.graph.n_vertices
    best = d[x, xp]
    # frontier[v] = shortest length of a G-path from x that ends (after its last segment) at v
    frontier = d[x].copy()
    for _ in range(max_junctions):
        nxt = np.full(n, math.inf)
        for end in range(n):
            if not np.isfinite(frontier[end]):
                continue
            for g in G.elements:
                # junction (g, start) with g.start = end
                start = act[G.inverse[g], end]
                nxt = np.minimum(nxt, frontier[end] + d[start])
        frontier = nxt
        best = min(best, frontier[xp])
    return float(best)


@dataclass(frozen=True)
class SingularLocus:
    stabilizers: dict  # vertex -> tuple of group elements
    pointlike: bool

    @property
    def vertices(self) -> list[int]:
        return sorted(self.stabilizers)

    @property
    def is_empty(self) -> bool:
        return not self.stabilizers


def singular_locus(orb: DiscreteOrbifold) -> SingularLocus:
    act = orb.action
    stabs = {}
    for x in act.points:
        s = act.stabilizer(x)
        if len(s) > 1:
            stabs[x] = tuple(s)
    pointlike = True
    for key in orb.graph.edges:
        u, v = sorted(key)
        if u in stabs and v in stabs:
            pointlike = False  # adjacent singular vertices
            break
        if any(act.act(g, u) == u and act.act(g, v) == v for g in act.group.elements if g != act.group.identity):
            pointlike = False
            break
    return SingularLocus(stabs, pointlike)


def write_distance_csv(path, orb: DiscreteOrbifold) -> None:
    table = orbifold_distance_table(orb)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "x'", "d"])
        for x in orb.graph.vertices:
            for xp in orb.graph.vertices:
                w.writerow([x, xp, f"{table[x, xp]:.12g}"])
