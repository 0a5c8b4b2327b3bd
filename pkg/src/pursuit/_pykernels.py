"""Pure Python / numpy implementation of the geometric kernels.

Every function takes the environment boundary as ``(E, 4)`` rows of
``(ax, ay, bx, by)`` per directed edge: a float64 array for the vectorised
functions, a list of tuples for the scalar ones.  Rings are closed,
so the start points of all edges enumerate every polygon vertex exactly once.

The compiled module ``_kernels`` exposes the same functions with the same
semantics; ``pursuit.kernels`` picks one at import time.
"""

from __future__ import annotations

import math

import numpy as np


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def on_boundary(edges, x, y, eps):
    for ax, ay, bx, by in edges:
        ex, ey = bx - ax, by - ay
        ll = ex * ex + ey * ey
        t = ((x - ax) * ex + (y - ay) * ey) / ll
        t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
        dx, dy = ax + t * ex - x, ay + t * ey - y
        if dx * dx + dy * dy <= eps * eps:
            return True
    return False


def _parity(edges, x, y):
    inside = False
    for ax, ay, bx, by in edges:
        if (ay > y) != (by > y):
            xint = ax + (y - ay) * (bx - ax) / (by - ay)
            if x < xint:
                inside = not inside
    return inside


def in_closure(edges, x, y, eps):
    """True if (x, y) is in free space or on its boundary."""
    if on_boundary(edges, x, y, eps):
        return True
    return _parity(edges, x, y)


def in_interior(edges, x, y, eps):
    """True if (x, y) is in free space and farther than eps from the boundary."""
    if on_boundary(edges, x, y, eps):
        return False
    return _parity(edges, x, y)


def segment_visible(edges, px, py, qx, qy, eps):
    """Grazing-tolerant visibility between two points of the closed free space.

    The pair is put in lexicographic order first so the predicate is exactly
    symmetric under floating point.
    """
    if (qx, qy) < (px, py):
        px, py, qx, qy = qx, qy, px, py
    ux, uy = qx - px, qy - py
    length = math.hypot(ux, uy)
    if length <= eps:
        return in_closure(edges, px, py, eps)
    tol = eps / length
    cuts = [0.0, 1.0]
    for ax, ay, bx, by in edges:
        da = _cross(ux, uy, ax - px, ay - py) / length
        db = _cross(ux, uy, bx - px, by - py) / length
        if (da > eps and db < -eps) or (da < -eps and db > eps):
            ex, ey = bx - ax, by - ay
            la = math.hypot(ex, ey)
            dp = _cross(ex, ey, px - ax, py - ay) / la
            dq = _cross(ex, ey, qx - ax, qy - ay) / la
            if (dp > eps and dq < -eps) or (dp < -eps and dq > eps):
                return False
        if -eps <= da <= eps:
            t = ((ax - px) * ux + (ay - py) * uy) / (length * length)
            if tol < t < 1.0 - tol:
                cuts.append(t)
    cuts.sort()
    for t0, t1 in zip(cuts, cuts[1:]):
        if t1 - t0 <= 2.0 * tol:
            continue
        tm = 0.5 * (t0 + t1)
        if not in_closure(edges, px + tm * ux, py + tm * uy, eps):
            return False
    return True


def _closure_many(edges, xs, ys, eps):
    ax, ay, bx, by = edges[:, 0], edges[:, 1], edges[:, 2], edges[:, 3]
    ex, ey = bx - ax, by - ay
    ll = ex * ex + ey * ey
    px = xs[:, None]
    py = ys[:, None]
    t = np.clip(((px - ax) * ex + (py - ay) * ey) / ll, 0.0, 1.0)
    dx = ax + t * ex - px
    dy = ay + t * ey - py
    near = ((dx * dx + dy * dy) <= eps * eps).any(axis=1)
    straddle = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = ax + (py - ay) * ex / ey
    hits = straddle & (px < xint)
    inside = (hits.sum(axis=1) % 2) == 1
    return near, inside


def points_in_free(edges, pts, eps, relaxed):
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        return np.zeros(0, dtype=bool)
    near, inside = _closure_many(edges, pts[:, 0], pts[:, 1], eps)
    if relaxed:
        return near | inside
    return inside & ~near


def visible_from(edges, px, py, targets, eps):
    """Vectorised ``segment_visible`` from one source to many targets."""
    targets = np.asarray(targets, dtype=np.float64).reshape(-1, 2)
    n = len(targets)
    out = np.zeros(n, dtype=bool)
    if n == 0:
        return out
    rows = edges.tolist()
    tx, ty = targets[:, 0], targets[:, 1]
    swap = (tx < px) | ((tx == px) & (ty < py))
    sx = np.where(swap, tx, px)
    sy = np.where(swap, ty, py)
    ex_, ey_ = np.where(swap, px, tx), np.where(swap, py, ty)
    ux = ex_ - sx
    uy = ey_ - sy
    length = np.hypot(ux, uy)
    short = length <= eps
    for k in np.nonzero(short)[0]:
        out[k] = segment_visible(rows, px, py, tx[k], ty[k], eps)
    idx = np.nonzero(~short)[0]
    if len(idx) == 0:
        return out
    sx, sy = sx[idx, None], sy[idx, None]
    qx, qy = ex_[idx, None], ey_[idx, None]
    ux, uy, length = ux[idx, None], uy[idx, None], length[idx, None]
    ax, ay, bx, by = edges[:, 0], edges[:, 1], edges[:, 2], edges[:, 3]
    da = (ux * (ay - sy) - uy * (ax - sx)) / length
    db = (ux * (by - sy) - uy * (bx - sx)) / length
    ex, ey = bx - ax, by - ay
    la = np.hypot(ex, ey)
    dp = (ex * (sy - ay) - ey * (sx - ax)) / la
    dq = (ex * (qy - ay) - ey * (qx - ax)) / la
    straddle_line = ((da > eps) & (db < -eps)) | ((da < -eps) & (db > eps))
    straddle_edge = ((dp > eps) & (dq < -eps)) | ((dp < -eps) & (dq > eps))
    blocked = (straddle_line & straddle_edge).any(axis=1)
    tol = eps / length
    t = ((ax - sx) * ux + (ay - sy) * uy) / (length * length)
    touch = ((np.abs(da) <= eps) & (t > tol) & (t < 1.0 - tol)).any(axis=1)
    simple = ~blocked & ~touch
    if simple.any():
        mx = (sx + 0.5 * ux)[simple, 0]
        my = (sy + 0.5 * uy)[simple, 0]
        near, inside = _closure_many(edges, mx, my, eps)
        out[idx[simple]] = near | inside
    grazing = ~blocked & touch
    if grazing.any():
        out[idx[grazing]] = _pieces_free(
            edges, sx[grazing], sy[grazing], ux[grazing], uy[grazing], t[grazing], da[grazing], tol[grazing], eps
        )
    return out


def _pieces_free(edges, sx, sy, ux, uy, t, da, tol, eps):
    """Segments that touch boundary vertices: split at each touch and test
    every piece's midpoint, as ``segment_visible`` does one at a time."""
    cut = (np.abs(da) <= eps) & (t > tol) & (t < 1.0 - tol)
    n = len(sx)
    ts = np.full((n, edges.shape[0] + 2), np.nan)
    ts[:, 0] = 0.0
    ts[:, 1] = 1.0
    ts[:, 2:] = np.where(cut, t, np.nan)
    ts.sort(axis=1)  # NaN sorts last
    t0, t1 = ts[:, :-1], ts[:, 1:]
    with np.errstate(invalid="ignore"):
        live = (t1 - t0) > 2.0 * tol
    tm = 0.5 * (t0 + t1)
    rows, cols = np.nonzero(live)
    mx = sx[rows, 0] + tm[rows, cols] * ux[rows, 0]
    my = sy[rows, 0] + tm[rows, cols] * uy[rows, 0]
    near, inside = _closure_many(edges, mx, my, eps)
    ok = np.ones(n, dtype=bool)
    np.logical_and.at(ok, rows, near | inside)
    return ok


def segments_cross(edges, segs, eps):
    """For each segment, True if it properly crosses some boundary edge."""
    segs = np.asarray(segs, dtype=np.float64).reshape(-1, 4)
    if len(segs) == 0:
        return np.zeros(0, dtype=bool)
    px, py = segs[:, 0:1], segs[:, 1:2]
    qx, qy = segs[:, 2:3], segs[:, 3:4]
    ux, uy = qx - px, qy - py
    length = np.maximum(np.hypot(ux, uy), eps)
    ax, ay, bx, by = edges[:, 0], edges[:, 1], edges[:, 2], edges[:, 3]
    da = (ux * (ay - py) - uy * (ax - px)) / length
    db = (ux * (by - py) - uy * (bx - px)) / length
    ex, ey = bx - ax, by - ay
    la = np.hypot(ex, ey)
    dp = (ex * (py - ay) - ey * (px - ax)) / la
    dq = (ex * (qy - ay) - ey * (qx - ax)) / la
    s1 = ((da > eps) & (db < -eps)) | ((da < -eps) & (db > eps))
    s2 = ((dp > eps) & (dq < -eps)) | ((dp < -eps) & (dq > eps))
    return (s1 & s2).any(axis=1)
