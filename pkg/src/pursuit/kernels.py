"""Backend selection for the geometric hot loops.

The compiled extension is used when it imports; otherwise the numpy
fallback.  Set ``PURSUIT_PURE=1`` to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_ext = None
if os.environ.get("PURSUIT_PURE") != "1":
    try:
        from . import _kernels as _ext  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on build
        _ext = None

BACKEND = "cython" if _ext is not None else "python"


class Boundary:
    """Edge table of an environment in the layouts both backends want."""

    __slots__ = ("array", "rows")

    def __init__(self, segments):
        self.array = np.ascontiguousarray(np.asarray(segments, dtype=np.float64).reshape(-1, 4))
        self.rows = [tuple(r) for r in self.array.tolist()]


def _pick(backend: str | None):
    if backend is None:
        backend = BACKEND
    if backend == "cython":
        if _ext is None:
            raise RuntimeError("compiled kernels are not available")
        return _ext, True
    return _pykernels, False


def segment_visible(b: Boundary, p, q, eps: float, backend: str | None = None) -> bool:
    mod, compiled = _pick(backend)
    return bool(mod.segment_visible(b.array if compiled else b.rows, p[0], p[1], q[0], q[1], eps))


def in_closure(b: Boundary, p, eps: float, backend: str | None = None) -> bool:
    mod, compiled = _pick(backend)
    return bool(mod.in_closure(b.array if compiled else b.rows, p[0], p[1], eps))


def in_interior(b: Boundary, p, eps: float, backend: str | None = None) -> bool:
    mod, compiled = _pick(backend)
    return bool(mod.in_interior(b.array if compiled else b.rows, p[0], p[1], eps))


def on_boundary(b: Boundary, p, eps: float, backend: str | None = None) -> bool:
    mod, compiled = _pick(backend)
    return bool(mod.on_boundary(b.array if compiled else b.rows, p[0], p[1], eps))


def visible_from(b: Boundary, p, targets, eps: float, backend: str | None = None) -> np.ndarray:
    mod, _ = _pick(backend)
    return mod.visible_from(b.array, float(p[0]), float(p[1]), targets, eps)


def points_in_free(b: Boundary, pts, eps: float, relaxed: bool, backend: str | None = None) -> np.ndarray:
    mod, _ = _pick(backend)
    return mod.points_in_free(b.array, pts, eps, relaxed)


def segments_cross(b: Boundary, segs, eps: float, backend: str | None = None) -> np.ndarray:
    mod, _ = _pick(backend)
    return mod.segments_cross(b.array, segs, eps)
