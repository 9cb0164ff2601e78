"""Pixel graph, geodesics, and progressive path reconstruction.

Pixels with positive structured score become vertices of an 8-connected
graph whose edge weights blend the scores of both endpoints.  The longest
geodesic (estimated per component by the 2-sweep heuristic, exact on trees)
is extracted as the coarsest structure; its edges drop to weight zero so the
next round pays only for unexplored side branches, and extraction repeats
until no round adds enough new vertices.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np


@dataclass
class PixelGraph:
    """8-connected weighted graph over retained pixels, CSR adjacency.

    Vertices are numbered in row-major pixel order; ``weights`` is mutable
    (reconstruction zeroes extracted edges) and stores each undirected edge
    twice, once per direction.
    """

    height: int
    width: int
    rows: np.ndarray
    cols: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.rows.size

    @property
    def n_edges(self) -> int:
        return self.indices.size // 2

    def neighbors(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[v], self.indptr[v + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    def zero_edge(self, u: int, v: int) -> None:
        """Set the weight of edge u-v to zero in both directions."""
        for a, b in ((u, v), (v, u)):
            lo, hi = self.indptr[a], self.indptr[a + 1]
            pos = lo + int(np.searchsorted(self.indices[lo:hi], b))
            if pos >= hi or self.indices[pos] != b:
                raise ValueError(f"no edge between vertices {u} and {v}")
            self.weights[pos] = 0.0


def build_graph(pi: np.ndarray, threshold: float = 0.0,
                invert_weights: bool = False) -> PixelGraph:
    """Graph over pixels whose structured score exceeds the threshold.

    8-neighbor edges weighted by Euclidean step length times the mean score
    of the two endpoints.  ``invert_weights`` flips the score into a cost
    (max score minus score) for experiments where low-score detours should
    be penalized instead.
    """
    pi = np.asarray(pi, dtype=np.float64)
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    height, width = pi.shape
    keep = pi > threshold
    rows, cols = np.nonzero(keep)
    n = rows.size
    vertex_id = np.full(pi.shape, -1, dtype=np.intp)
    vertex_id[rows, cols] = np.arange(n)
    node_w = pi[rows, cols]
    if invert_weights:
        node_w = (node_w.max() if n else 0.0) - node_w

    edge_u = []
    edge_v = []
    edge_w = []
    for dr, dc in ((0, 1), (1, -1), (1, 0), (1, 1)):
        src = keep.copy()
        if dr == 1:
            src[-1, :] = False
        if dc == 1:
            src[:, -1] = False
        elif dc == -1:
            src[:, 0] = False
        rr, cc = np.nonzero(src & np.roll(np.roll(keep, -dr, axis=0), -dc, axis=1))
        if rr.size == 0:
            continue
        u = vertex_id[rr, cc]
        v = vertex_id[rr + dr, cc + dc]
        dist = np.hypot(dr, dc)
        edge_u.append(u)
        edge_v.append(v)
        edge_w.append(dist * (node_w[u] + node_w[v]) / 2.0)

    if edge_u:
        u = np.concatenate(edge_u)
        v = np.concatenate(edge_v)
        w = np.concatenate(edge_w)
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
        ww = np.concatenate([w, w])
        order = np.lexsort((dst, src))
        src, dst, ww = src[order], dst[order], ww[order]
        indptr = np.zeros(n + 1, dtype=np.intp)
        np.add.at(indptr, src + 1, 1)
        indptr = np.cumsum(indptr)
    else:
        dst = np.empty(0, dtype=np.intp)
        ww = np.empty(0, dtype=np.float64)
        indptr = np.zeros(n + 1, dtype=np.intp)
    return PixelGraph(height=height, width=width, rows=rows, cols=cols,
                      indptr=indptr.astype(np.intp), indices=dst.astype(np.intp),
                      weights=ww.astype(np.float64))


def dijkstra(g: PixelGraph, source: int) -> tuple[np.ndarray, np.ndarray]:
    """Single-source shortest paths.

    Returns (distances, predecessors); unreachable vertices get infinite
    distance and predecessor -1.  Equal-cost alternatives settle on the
    smaller predecessor id, so reported paths are deterministic.
    """
    n = g.n_vertices
    if not 0 <= source < n:
        raise ValueError(f"source {source} not a vertex")
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.intp)
    done = np.zeros(n, dtype=bool)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        nbrs, ws = g.neighbors(u)
        for v, w in zip(nbrs, ws):
            if done[v]:
                continue
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
            elif nd == dist[v] and u < pred[v]:
                pred[v] = u
    return dist, pred


def connected_components(g: PixelGraph) -> list[np.ndarray]:
    """Vertex index arrays of each component, ordered by smallest member."""
    n = g.n_vertices
    seen = np.zeros(n, dtype=bool)
    components = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        members = []
        while stack:
            u = stack.pop()
            members.append(u)
            nbrs, _ = g.neighbors(u)
            for v in nbrs:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        components.append(np.sort(np.array(members, dtype=np.intp)))
    return components


@dataclass
class GeodesicPath:
    """A shortest path between two far-apart vertices."""

    vertices: np.ndarray
    pixels: np.ndarray
    weighted_length: float
    new_vertex_count: int = 0
    iteration: int = 0


def _farthest(dist: np.ndarray, members: np.ndarray) -> int:
    """Member with maximum finite distance; earliest index wins ties."""
    d = dist[members]
    return int(members[int(np.argmax(d))])


def _backtrack(pred: np.ndarray, start: int, end: int) -> np.ndarray:
    path = [end]
    while path[-1] != start:
        p = pred[path[-1]]
        if p < 0:
            raise ValueError("broken predecessor chain")
        path.append(int(p))
    return np.array(path[::-1], dtype=np.intp)


def two_sweep(g: PixelGraph, start: int | None = None,
              members: np.ndarray | None = None) -> GeodesicPath:
    """Longest-geodesic estimate by two shortest-path sweeps.

    From a start vertex, sweep to the farthest vertex u of its component,
    then from u to its farthest vertex v; the returned u-v path is a true
    geodesic, never longer than the component diameter and exactly the
    diameter when the component is a tree.  Without an explicit start, the
    smallest vertex id of the largest component is used.
    """
    if g.n_vertices == 0:
        raise ValueError("empty graph")
    if start is None:
        comps = connected_components(g)
        members = max(comps, key=len)
        start = int(members[0])
    if members is None:
        comps = connected_components(g)
        members = next(c for c in comps if start in c)
    dist, _ = dijkstra(g, start)
    u = _farthest(dist, members)
    dist_u, pred_u = dijkstra(g, u)
    v = _farthest(dist_u, members)
    vertices = _backtrack(pred_u, u, v)
    pixels = np.column_stack([g.rows[vertices], g.cols[vertices]])
    return GeodesicPath(vertices=vertices, pixels=pixels,
                        weighted_length=float(dist_u[v]),
                        new_vertex_count=vertices.size)


@dataclass
class Reconstruction:
    """Ordered geodesic paths; iteration index is topological importance."""

    paths: list = field(default_factory=list)
    height: int = 0
    width: int = 0

    @property
    def vertex_set(self) -> set:
        out = set()
        for p in self.paths:
            out.update(int(v) for v in p.vertices)
        return out

    def mask(self) -> np.ndarray:
        m = np.zeros((self.height, self.width), dtype=bool)
        for p in self.paths:
            m[p.pixels[:, 0], p.pixels[:, 1]] = True
        return m


def reconstruct(g: PixelGraph, min_length: int, max_iter: int = 1000,
                seed: int | None = None) -> Reconstruction:
    """Progressive extraction of geodesic paths (coarse to fine).

    Each round estimates the longest geodesic of every still-active
    component, keeps the globally longest one whose count of not yet
    extracted vertices reaches ``min_length``, zeroes its edge weights, and
    repeats.  A component whose best path stops bringing enough new vertices
    is retired for good: with no further weight changes inside it, later
    rounds could only repeat the same path.

    ``seed`` picks the sweep start vertex of each component at random; by
    default the smallest vertex id is used.
    """
    if min_length < 1:
        raise ValueError("min_length must be at least 1")
    rec = Reconstruction(paths=[], height=g.height, width=g.width)
    if g.n_vertices == 0:
        return rec
    rng = np.random.default_rng(seed) if seed is not None else None
    extracted = np.zeros(g.n_vertices, dtype=bool)
    active = [c for c in connected_components(g) if c.size >= min_length]
    candidates: dict[int, GeodesicPath] = {}

    for iteration in range(1, max_iter + 1):
        still_active = []
        for comp in active:
            key = int(comp[0])
            if key not in candidates:
                if rng is not None:
                    start = int(comp[rng.integers(0, comp.size)])
                else:
                    start = key
                path = two_sweep(g, start=start, members=comp)
                path.new_vertex_count = int(np.count_nonzero(~extracted[path.vertices]))
                candidates[key] = path
            if candidates[key].new_vertex_count >= min_length:
                still_active.append(comp)
            else:
                del candidates[key]
        active = still_active
        if not active:
            break
        best_key = None
        best_len = -np.inf
        for comp in active:
            key = int(comp[0])
            if candidates[key].weighted_length > best_len:
                best_len = candidates[key].weighted_length
                best_key = key
        path = candidates.pop(best_key)
        path.iteration = iteration
        rec.paths.append(path)
        extracted[path.vertices] = True
        for a, b in zip(path.vertices[:-1], path.vertices[1:]):
            g.zero_edge(int(a), int(b))
    return rec


def reconstruction_to_dict(rec: Reconstruction, config_hash: str | None = None) -> dict:
    out = {
        "height": rec.height,
        "width": rec.width,
        "paths": [
            {
                "iteration": p.iteration,
                "weighted_length": p.weighted_length,
                "new_vertex_count": p.new_vertex_count,
                "pixels": [[int(r), int(c)] for r, c in p.pixels],
            }
            for p in rec.paths
        ],
    }
    if config_hash:
        out["config_hash"] = config_hash
    return out


PATH_COLORS = (
    (231, 76, 60), (46, 204, 113), (52, 152, 219), (241, 196, 15),
    (155, 89, 182), (26, 188, 156), (230, 126, 34), (236, 240, 241),
)


def render_overlay(image: np.ndarray, rec: Reconstruction) -> np.ndarray:
    """Gray base image with extraction iterations drawn in distinct colors."""
    base = np.asarray(image, dtype=np.float64)
    lo, hi = float(base.min()), float(base.max())
    gray = (base - lo) / (hi - lo) if hi > lo else np.zeros_like(base)
    rgb = np.repeat((gray * 255.0).astype(np.uint8)[:, :, None], 3, axis=2)
    for p in rec.paths:
        color = PATH_COLORS[(p.iteration - 1) % len(PATH_COLORS)]
        rgb[p.pixels[:, 0], p.pixels[:, 1]] = color
    return rgb
