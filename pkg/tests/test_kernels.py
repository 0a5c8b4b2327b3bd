"""The compiled kernels and the numpy fallback must agree exactly."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES, load
from pursuit import kernels
from pursuit.geometry import EPS

needs_ext = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")


def _pts(name, k, seed):
    env = load(name)
    x0, y0, x1, y1 = env.bbox
    rng = np.random.default_rng(seed)
    pad = 0.1 * (x1 - x0)
    pts = np.column_stack([rng.uniform(x0 - pad, x1 + pad, k), rng.uniform(y0 - pad, y1 + pad, k)])
    verts = np.array([v for r in env.rings for v in r.vertices], dtype=float)
    return env, np.vstack([pts, verts])


@needs_ext
@pytest.mark.parametrize("name", FIXTURES)
def test_vector_kernels_agree(name):
    env, pts = _pts(name, 600, 1)
    b = env.boundary
    for relaxed in (False, True):
        a = kernels.points_in_free(b, pts, EPS, relaxed, backend="python")
        c = kernels.points_in_free(b, pts, EPS, relaxed, backend="cython")
        assert np.array_equal(a, c)
    for viewer in pts[::37]:
        a = kernels.visible_from(b, viewer, pts, EPS, backend="python")
        c = kernels.visible_from(b, viewer, pts, EPS, backend="cython")
        assert np.array_equal(a, c)
    segs = np.hstack([pts[:300], pts[300:600]])
    assert np.array_equal(
        kernels.segments_cross(b, segs, EPS, backend="python"), kernels.segments_cross(b, segs, EPS, backend="cython")
    )


@needs_ext
@pytest.mark.parametrize("name", ["l_room", "square_hole", "dumbbell"])
def test_scalar_kernels_agree(name):
    env, pts = _pts(name, 150, 2)
    b = env.boundary

    @settings(max_examples=300)
    @given(st.integers(0, len(pts) - 1), st.integers(0, len(pts) - 1))
    def check(i, j):
        p, q = tuple(pts[i]), tuple(pts[j])
        for fn in (kernels.in_closure, kernels.in_interior, kernels.on_boundary):
            assert fn(b, p, EPS, backend="python") == fn(b, p, EPS, backend="cython")
        assert kernels.segment_visible(b, p, q, EPS, backend="python") == kernels.segment_visible(
            b, p, q, EPS, backend="cython"
        )
        # scalar and vector entry points are the same predicate
        assert kernels.segment_visible(b, p, q, EPS) == bool(kernels.visible_from(b, p, np.array([q]), EPS)[0])

    check()


def test_fallback_selected_by_environment_variable():
    code = "from pursuit import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, PURSUIT_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend_request_fails_cleanly(monkeypatch):
    monkeypatch.setattr(kernels, "_ext", None)
    with pytest.raises(RuntimeError):
        kernels.in_closure(load("l_room").boundary, (0.5, 0.5), EPS, backend="cython")
    assert kernels.in_closure(load("l_room").boundary, (0.5, 0.5), EPS, backend="python")


def _boundary_heavy(env):
    """Vertices and points along every edge: sightlines that slide along walls
    and pass through corners."""
    pts = []
    for ring in env.rings:
        vs = ring.vertices
        for a, b in zip(vs, vs[1:] + vs[:1]):
            for t in np.linspace(0, 1, 5):
                pts.append((a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))
    return np.array(pts, dtype=float)


@pytest.mark.parametrize("name", ["l_room", "comb", "square_hole", "dumbbell"])
def test_vector_visibility_matches_scalar_on_grazing_sightlines(name):
    env = load(name)
    b = env.boundary
    pts = _boundary_heavy(env)
    for viewer in pts[::3]:
        vec = kernels.visible_from(b, viewer, pts, EPS, backend="python")
        one = [kernels.segment_visible(b, tuple(viewer), tuple(q), EPS, backend="python") for q in pts]
        assert vec.tolist() == one
