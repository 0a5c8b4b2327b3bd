"""Raster model of free space used to check plans independently.

Free space is covered with square cells; a cell is free when its centre is
strictly inside.  The intruder occupies cells and moves between 4-adjacent
free cells (never through a wall) at unbounded speed, so between two sensing
instants it can reach any cell connected to it through unseen cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import kernels
from .geometry import EPS, Environment

DEFAULT_RESOLUTION = 200


class GridTooCoarse(ValueError):
    pass


class GridModel:
    def __init__(self, env: Environment, resolution: int = DEFAULT_RESOLUTION):
        if resolution < 1:
            raise ValueError("grid resolution must be positive")
        self.env = env
        self.h = env.diagonal / resolution
        x0, y0, x1, y1 = env.bbox
        self.nx = max(1, math.ceil((x1 - x0) / self.h))
        self.ny = max(1, math.ceil((y1 - y0) / self.h))
        self.origin = (x0, y0)
        xs = x0 + (np.arange(self.nx) + 0.5) * self.h
        ys = y0 + (np.arange(self.ny) + 0.5) * self.h
        gx, gy = np.meshgrid(xs, ys, indexing="xy")  # shape (ny, nx)
        all_centers = np.column_stack([gx.ravel(), gy.ravel()])
        free = kernels.points_in_free(env.boundary, all_centers, EPS, False)
        self.free_flat = np.nonzero(free)[0]  # raster index (row-major, y then x) of each free cell
        self.centers = all_centers[self.free_flat]
        self.n = len(self.free_flat)
        lookup = -np.ones(self.nx * self.ny, dtype=np.int64)
        lookup[self.free_flat] = np.arange(self.n)
        self.lookup = lookup.reshape(self.ny, self.nx)
        self._edges = self._adjacency()
        self._vis_cache: dict = {}

    def _adjacency(self) -> np.ndarray:
        lk = self.lookup
        pairs = []
        a, b = lk[:, :-1].ravel(), lk[:, 1:].ravel()
        pairs.append(np.column_stack([a, b]))
        a, b = lk[:-1, :].ravel(), lk[1:, :].ravel()
        pairs.append(np.column_stack([a, b]))
        e = np.vstack(pairs)
        e = e[(e[:, 0] >= 0) & (e[:, 1] >= 0)]
        if len(e):
            segs = np.hstack([self.centers[e[:, 0]], self.centers[e[:, 1]]])
            blocked = kernels.segments_cross(self.env.boundary, segs, EPS)
            e = e[~blocked]
        return e

    @property
    def min_feature(self) -> float:
        rows = self.env.boundary.array
        return float(np.min(np.hypot(rows[:, 2] - rows[:, 0], rows[:, 3] - rows[:, 1])))

    def check_resolution(self) -> None:
        if self.min_feature < 2 * self.h:
            raise GridTooCoarse(
                f"grid cell {self.h:.4g} is too coarse for the shortest boundary edge {self.min_feature:.4g}; "
                "raise the grid resolution"
            )

    def visible(self, point) -> np.ndarray:
        key = (float(point[0]), float(point[1]))
        hit = self._vis_cache.get(key)
        if hit is None:
            hit = kernels.visible_from(self.env.boundary, key, self.centers, EPS)
            self._vis_cache[key] = hit
        return hit

    def visible_union(self, points) -> np.ndarray:
        out = np.zeros(self.n, dtype=bool)
        for p in points:
            out |= self.visible(p)
        return out

    def spread(self, contaminated: np.ndarray, seen: np.ndarray) -> np.ndarray:
        """Cells the intruder may occupy after moving freely through unseen cells."""
        hidden = ~seen
        seeds = contaminated & hidden
        if not seeds.any():
            return seeds
        e = self._edges
        keep = hidden[e[:, 0]] & hidden[e[:, 1]]
        e = e[keep]
        adj = coo_matrix((np.ones(len(e), dtype=np.int8), (e[:, 0], e[:, 1])), shape=(self.n, self.n))
        _, comp = connected_components(adj, directed=False)
        hot = np.zeros(comp.max() + 1, dtype=bool)
        hot[comp[seeds]] = True
        return hot[comp] & hidden

    def raster(self, mask: np.ndarray) -> np.ndarray:
        """Free-cell mask back onto the full (ny, nx) raster."""
        out = np.zeros(self.nx * self.ny, dtype=bool)
        out[self.free_flat] = mask
        return out.reshape(self.ny, self.nx)


@dataclass
class Snapshot:
    round: int
    positions: dict  # robot id -> (x, y)
    contaminated: np.ndarray
    seen: np.ndarray


def sweep(grid: GridModel, rounds, initial: dict):
    """Replay robot motion on the grid, yielding the state after each round.

    ``initial`` maps robot id to its starting point; ``rounds`` is an iterable
    of (round, spawns, moves) where spawns map new ids to points and moves map
    ids to (from_point, to_point).  Movers advance in lockstep, sampled so no
    robot moves more than one cell between sensing instants.
    """
    pos = dict(initial)
    seen = grid.visible_union(pos.values())
    contaminated = ~seen
    yield Snapshot(0, dict(pos), contaminated, seen)
    for rnd, spawns, moves in rounds:
        pos.update(spawns)
        if spawns:
            seen = grid.visible_union(pos.values())
            contaminated = grid.spread(contaminated, seen)
        if moves:
            longest = max(math.dist(a, b) for a, b in moves.values())
            k = max(1, math.ceil(longest / grid.h))
            for i in range(1, k + 1):
                t = i / k
                cur = dict(pos)
                for rid, (a, b) in moves.items():
                    cur[rid] = b if i == k else (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
                seen = grid.visible_union(cur.values())
                contaminated = grid.spread(contaminated, seen)
            for rid, (_, b) in moves.items():
                pos[rid] = b
        yield Snapshot(rnd, dict(pos), contaminated, seen)
