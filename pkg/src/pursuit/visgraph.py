"""Distance-weighted visibility graph over critical points."""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CriticalPoint, Environment, visible_many

log = logging.getLogger(__name__)

TIE_TOL = 1e-12


class UnknownNode(KeyError):
    pass


@dataclass(frozen=True)
class VisibilityGraph:
    nodes: tuple[int, ...]
    weights: dict = field(default_factory=dict)  # frozenset({a, b}) -> distance

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return sorted((min(k), max(k), w) for k, w in self.weights.items())

    def neighbors(self, u: int) -> list[int]:
        return self._adj.get(u, [])

    def weight(self, a: int, b: int) -> float:
        return self.weights[frozenset((a, b))]

    def has_edge(self, a: int, b: int) -> bool:
        return a != b and frozenset((a, b)) in self.weights

    @property
    def _adj(self) -> dict[int, list[int]]:
        adj = self.__dict__.get("_adj_cache")
        if adj is None:
            adj = {u: [] for u in self.nodes}
            for a, b, _ in self.edges:
                adj[a].append(b)
                adj[b].append(a)
            for u in adj:
                adj[u].sort()
            object.__setattr__(self, "_adj_cache", adj)
        return adj

    def to_json(self, cps: list[CriticalPoint]) -> dict:
        loc = {c.id: c.location for c in cps}
        return {
            "nodes": [{"id": u, "x": loc[u].x, "y": loc[u].y} for u in self.nodes],
            "edges": [{"a": a, "b": b, "w": w} for a, b, w in self.edges],
        }


def build_visibility_graph(env: Environment, cps: list[CriticalPoint]) -> VisibilityGraph:
    pts = np.array([c.location for c in cps], dtype=np.float64).reshape(-1, 2)
    weights = {}
    for i, c in enumerate(cps):
        if i + 1 >= len(cps):
            break
        vis = visible_many(env, c.location, pts[i + 1 :])
        for j in np.nonzero(vis)[0]:
            d = cps[i + 1 + j]
            weights[frozenset((c.id, d.id))] = math.dist(c.location, d.location)
    g = VisibilityGraph(tuple(sorted(c.id for c in cps)), weights)
    if len(g.nodes) > 1 and len(connected_components(g)) > 1:
        log.warning("visibility graph over critical points is disconnected")
    return g


def shortest_path(g: VisibilityGraph, src: int, dst: int):
    """Dijkstra with lexicographic tie-breaking on the id sequence.

    Returns ``(path, length)`` or ``None`` when dst is unreachable.
    """
    for u in (src, dst):
        if u not in g.nodes:
            raise UnknownNode(f"unknown node id {u}")
    best: dict[int, tuple[float, tuple[int, ...]]] = {src: (0.0, (src,))}
    heap = [(0.0, (src,))]
    done = set()
    while heap:
        d, path = heapq.heappop(heap)
        u = path[-1]
        if u in done or best[u] != (d, path):
            continue
        done.add(u)
        if u == dst:
            return list(path), d
        for v in g.neighbors(u):
            if v in done:
                continue
            nd = d + g.weight(u, v)
            npath = path + (v,)
            cur = best.get(v)
            if cur is None or nd < cur[0] - TIE_TOL or (abs(nd - cur[0]) <= TIE_TOL and npath < cur[1]):
                best[v] = (nd, npath)
                heapq.heappush(heap, (nd, npath))
    return None


def connected_components(g: VisibilityGraph, removed=frozenset()) -> list[set[int]]:
    removed = set(removed)
    seen = set(removed)
    comps = []
    for s in g.nodes:
        if s in seen:
            continue
        comp = {s}
        seen.add(s)
        stack = [s]
        while stack:
            u = stack.pop()
            for v in g.neighbors(u):
                if v not in seen:
                    seen.add(v)
                    comp.add(v)
                    stack.append(v)
        comps.append(comp)
    return sorted(comps, key=min)
