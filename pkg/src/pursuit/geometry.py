"""Polygonal free space, visibility predicates and critical points."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels

EPS = 1e-9
DEFAULT_SWEEP_SAMPLES = 16
DEFAULT_EDGE_SAMPLES = 3


class InvalidEnvironment(ValueError):
    """Raised by the loader; ``polygon`` is 0 for the outer boundary, k for hole k-1."""

    def __init__(self, message: str, polygon: int | None = None):
        super().__init__(message)
        self.polygon = polygon


class Point(NamedTuple):
    x: float
    y: float


def _pt(p) -> Point:
    return p if isinstance(p, Point) else Point(float(p[0]), float(p[1]))


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[Point, ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(_pt(v) for v in self.vertices))

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def signed_area(self) -> float:
        v = self.vertices
        s = 0.0
        for i in range(len(v)):
            x0, y0 = v[i]
            x1, y1 = v[(i + 1) % len(v)]
            s += x0 * y1 - x1 * y0
        return 0.5 * s

    def edges(self) -> list[tuple[Point, Point]]:
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]


@dataclass(frozen=True)
class Environment:
    """Outer polygon (counterclockwise) minus clockwise holes.

    With these orientations the free space always lies to the left of every
    directed boundary edge.
    """

    outer: Polygon
    holes: tuple[Polygon, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "holes", tuple(self.holes))

    @property
    def rings(self) -> tuple[Polygon, ...]:
        return (self.outer,) + self.holes

    @cached_property
    def boundary(self) -> kernels.Boundary:
        segs = [(a.x, a.y, b.x, b.y) for ring in self.rings for a, b in ring.edges()]
        return kernels.Boundary(segs)

    @cached_property
    def bbox(self) -> tuple[float, float, float, float]:
        xs = [v.x for v in self.outer.vertices]
        ys = [v.y for v in self.outer.vertices]
        return min(xs), min(ys), max(xs), max(ys)

    @property
    def diagonal(self) -> float:
        x0, y0, x1, y1 = self.bbox
        return math.hypot(x1 - x0, y1 - y0)

    def to_dict(self) -> dict:
        return {
            "outer": [[v.x, v.y] for v in self.outer.vertices],
            "holes": [[[v.x, v.y] for v in h.vertices] for h in self.holes],
        }


@dataclass(frozen=True)
class CriticalPoint:
    id: int
    location: Point
    owner: tuple[int, int]  # (ring, vertex index); ring 0 is the outer polygon
    adjacent_edges: tuple[tuple[Point, Point], tuple[Point, Point]]


@dataclass(frozen=True)
class FrontierSegment:
    critical_point_id: int
    m: Point
    p: Point
    x: Point

    @property
    def segment(self) -> tuple[Point, Point, Point]:
        return (self.m, self.p, self.x)


# --------------------------------------------------------------------------
# loading and validation


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, p, eps=EPS) -> bool:
    ex, ey = b[0] - a[0], b[1] - a[1]
    ll = ex * ex + ey * ey
    t = ((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / ll
    t = min(1.0, max(0.0, t))
    return math.hypot(a[0] + t * ex - p[0], a[1] + t * ey - p[1]) <= eps


def segments_intersect(a, b, c, d, eps=EPS) -> bool:
    """Closed-segment intersection test, touching included."""
    o1, o2 = _orient(a, b, c), _orient(a, b, d)
    o3, o4 = _orient(c, d, a), _orient(c, d, b)
    if ((o1 > 0 > o2) or (o1 < 0 < o2)) and ((o3 > 0 > o4) or (o3 < 0 < o4)):
        return True
    return (
        _on_segment(a, b, c, eps)
        or _on_segment(a, b, d, eps)
        or _on_segment(c, d, a, eps)
        or _on_segment(c, d, b, eps)
    )


def _check_polygon(poly: Polygon, index: int) -> None:
    v = poly.vertices
    n = len(v)
    if n < 3:
        raise InvalidEnvironment(f"polygon {index}: needs at least 3 vertices, got {n}", index)
    for i, p in enumerate(v):
        if not (math.isfinite(p.x) and math.isfinite(p.y)):
            raise InvalidEnvironment(f"polygon {index}: vertex {i} is not finite", index)
        q = v[(i + 1) % n]
        if math.hypot(q.x - p.x, q.y - p.y) <= EPS:
            raise InvalidEnvironment(f"polygon {index}: vertices {i} and {(i + 1) % n} coincide", index)
    if abs(poly.signed_area) <= EPS:
        raise InvalidEnvironment(f"polygon {index}: zero area", index)
    edges = poly.edges()
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if segments_intersect(*edges[i], *edges[j]):
                raise InvalidEnvironment(f"polygon {index}: edges {i} and {j} intersect", index)


def _inside_ring(poly: Polygon, p) -> bool:
    b = kernels.Boundary([(a.x, a.y, c.x, c.y) for a, c in poly.edges()])
    return kernels.in_interior(b, p, EPS)


def make_environment(outer: Sequence, holes: Sequence[Sequence] = ()) -> Environment:
    """Build and validate an environment from raw coordinate lists."""
    try:
        outer_poly = Polygon(tuple(_pt(p) for p in outer))
        hole_polys = tuple(Polygon(tuple(_pt(p) for p in h)) for h in holes)
    except (TypeError, ValueError, IndexError) as exc:
        raise InvalidEnvironment(f"malformed coordinates: {exc}") from exc
    _check_polygon(outer_poly, 0)
    if outer_poly.signed_area <= 0:
        raise InvalidEnvironment("polygon 0: outer boundary must be counterclockwise", 0)
    outer_edges = outer_poly.edges()
    for k, h in enumerate(hole_polys, start=1):
        _check_polygon(h, k)
        if h.signed_area >= 0:
            raise InvalidEnvironment(f"polygon {k}: holes must be clockwise", k)
        if not all(_inside_ring(outer_poly, v) for v in h.vertices):
            raise InvalidEnvironment(f"polygon {k}: hole is not strictly inside the outer boundary", k)
        for e in h.edges():
            if any(segments_intersect(*e, *f) for f in outer_edges):
                raise InvalidEnvironment(f"polygon {k}: hole touches the outer boundary", k)
    for i, h in enumerate(hole_polys, start=1):
        for j in range(i + 1, len(hole_polys) + 1):
            g = hole_polys[j - 1]
            if any(segments_intersect(*e, *f) for e in h.edges() for f in g.edges()):
                raise InvalidEnvironment(f"polygon {j}: hole intersects hole {i}", j)
            if _inside_ring(Polygon(tuple(reversed(h.vertices))), g.vertices[0]) or _inside_ring(
                Polygon(tuple(reversed(g.vertices))), h.vertices[0]
            ):
                raise InvalidEnvironment(f"polygon {j}: hole nested with hole {i}", j)
    return Environment(outer_poly, hole_polys)


def environment_from_dict(data) -> Environment:
    if not isinstance(data, dict) or "outer" not in data:
        raise InvalidEnvironment('environment must be a JSON object with an "outer" key')
    holes = data.get("holes") or []
    if not isinstance(holes, list):
        raise InvalidEnvironment('"holes" must be a list of vertex arrays')
    return make_environment(data["outer"], holes)


def load_environment(path) -> Environment:
    with open(path, encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise InvalidEnvironment(f"line {exc.lineno}: {exc.msg}") from exc
    return environment_from_dict(data)


# --------------------------------------------------------------------------
# predicates


def point_in_free_space(env: Environment, p, relaxed: bool = False) -> bool:
    """Strict membership in free space; ``relaxed`` also accepts boundary points."""
    if relaxed:
        return kernels.in_closure(env.boundary, p, EPS)
    return kernels.in_interior(env.boundary, p, EPS)


def visible(env: Environment, p, q) -> bool:
    return kernels.segment_visible(env.boundary, p, q, EPS)


def visible_many(env: Environment, p, targets) -> np.ndarray:
    return kernels.visible_from(env.boundary, p, targets, EPS)


def sample_segment(a, b, samples: int) -> np.ndarray:
    """``samples`` evenly spaced points from a to b, endpoints included."""
    if samples <= 1:
        return np.array([[a[0], a[1]]], dtype=np.float64)
    t = np.linspace(0.0, 1.0, samples)[:, None]
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    pts = a + t * (b - a)
    pts[-1] = b
    return pts


def visible_along_segment(env: Environment, a, b, target, samples: int = DEFAULT_SWEEP_SAMPLES) -> bool:
    pts = sample_segment(a, b, samples)
    return bool(visible_many(env, target, pts).all())


def internal_angle(polygon: Polygon, vertex_index: int) -> float:
    """Angle on the solid side of a vertex.

    The solid side is the right-hand side of the traversal, which is the
    obstacle for clockwise holes and the exterior for a counterclockwise
    outer boundary.  Collinear vertices report exactly pi.
    """
    v = polygon.vertices
    n = len(v)
    p = v[vertex_index % n]
    a = v[(vertex_index - 1) % n]
    b = v[(vertex_index + 1) % n]
    d1 = (b.x - p.x, b.y - p.y)
    d2 = (a.x - p.x, a.y - p.y)
    cross = d1[0] * d2[1] - d1[1] * d2[0]
    dot = d1[0] * d2[0] + d1[1] * d2[1]
    if abs(cross) <= EPS * math.hypot(*d1) * math.hypot(*d2) and dot < 0:
        return math.pi
    free = math.atan2(cross, dot) % (2 * math.pi)
    return 2 * math.pi - free


def detect_critical_points(env: Environment) -> list[CriticalPoint]:
    cps = []
    for r, ring in enumerate(env.rings):
        v = ring.vertices
        n = len(v)
        for i in range(n):
            if internal_angle(ring, i) < math.pi:
                cps.append(
                    CriticalPoint(
                        id=len(cps),
                        location=v[i],
                        owner=(r, i),
                        adjacent_edges=((v[i - 1], v[i]), (v[i], v[(i + 1) % n])),
                    )
                )
    return cps


def edge_sample_points(cp: CriticalPoint, per_edge: int = DEFAULT_EDGE_SAMPLES) -> np.ndarray:
    """Sample points standing in for "the whole adjacent edge" of a critical point."""
    (a0, b0), (a1, b1) = cp.adjacent_edges
    return np.vstack([sample_segment(a0, b0, per_edge), sample_segment(a1, b1, per_edge)])


def watch_targets(cp: CriticalPoint, per_edge: int = DEFAULT_EDGE_SAMPLES) -> np.ndarray:
    return np.vstack([np.array([cp.location], dtype=np.float64), edge_sample_points(cp, per_edge)])


def watches(env: Environment, viewpoint, cp: CriticalPoint, per_edge: int = DEFAULT_EDGE_SAMPLES) -> bool:
    """A viewpoint clears ``cp`` if it sees the point and both adjacent edges."""
    return bool(visible_many(env, viewpoint, watch_targets(cp, per_edge)).all())


def _ray_hits(env: Environment, origin: Point, d: tuple[float, float]) -> list[float]:
    ts = []
    ox, oy = origin
    dx, dy = d
    for ax, ay, bx, by in env.boundary.rows:
        ex, ey = bx - ax, by - ay
        den = dx * ey - dy * ex
        wx, wy = ax - ox, ay - oy
        if abs(den) <= EPS * math.hypot(ex, ey):
            # parallel; collinear overlap contributes its endpoints
            if abs(wx * dy - wy * dx) <= EPS:
                ts.extend([wx * dx + wy * dy, (bx - ox) * dx + (by - oy) * dy])
            continue
        t = (wx * ey - wy * ex) / den
        s = (wx * dy - wy * dx) / den
        if -EPS <= s <= 1 + EPS:
            ts.append(t)
    return sorted(t for t in ts if t > EPS)


def compute_frontier(env: Environment, cp: CriticalPoint) -> list[FrontierSegment]:
    """Frontier polylines m -> p -> x for both edges adjacent to a critical point.

    The ray is cast from p away from the edge midpoint m.  Where it meets the
    boundary only tangentially (through a vertex, or sliding along a wall) and
    free space continues beyond, the contact is skipped.
    """
    out = []
    p = cp.location
    probe = max(1e-6, 1e-7 * env.diagonal)
    for a, b in cp.adjacent_edges:
        m = Point(0.5 * (a.x + b.x), 0.5 * (a.y + b.y))
        dx, dy = p.x - m.x, p.y - m.y
        norm = math.hypot(dx, dy)
        d = (dx / norm, dy / norm)
        x = None
        for t in _ray_hits(env, p, d):
            c = Point(p.x + t * d[0], p.y + t * d[1])
            beyond = (c.x + probe * d[0], c.y + probe * d[1])
            if not point_in_free_space(env, beyond, relaxed=True):
                x = c
                break
        if x is None:  # pragma: no cover - outer boundary always stops the ray
            raise RuntimeError(f"frontier ray from critical point {cp.id} escaped the environment")
        out.append(FrontierSegment(cp.id, m, p, x))
    return out
