# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled geometric kernels.

Mirror of ``_pykernels``; the two must agree bit for bit on every input.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport hypot
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline double _cross(double ax, double ay, double bx, double by) nogil:
    return ax * by - ay * bx


cdef bint _on_boundary(const double[:, ::1] e, double x, double y, double eps) nogil:
    cdef Py_ssize_t i
    cdef double ax, ay, ex, ey, ll, t, dx, dy
    for i in range(e.shape[0]):
        ax = e[i, 0]
        ay = e[i, 1]
        ex = e[i, 2] - ax
        ey = e[i, 3] - ay
        ll = ex * ex + ey * ey
        t = ((x - ax) * ex + (y - ay) * ey) / ll
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        dx = ax + t * ex - x
        dy = ay + t * ey - y
        if dx * dx + dy * dy <= eps * eps:
            return True
    return False


cdef bint _parity(const double[:, ::1] e, double x, double y) nogil:
    cdef Py_ssize_t i
    cdef bint inside = False
    cdef double ax, ay, bx, by, xint
    for i in range(e.shape[0]):
        ax = e[i, 0]
        ay = e[i, 1]
        bx = e[i, 2]
        by = e[i, 3]
        if (ay > y) != (by > y):
            xint = ax + (y - ay) * (bx - ax) / (by - ay)
            if x < xint:
                inside = not inside
    return inside


cdef inline bint _in_closure(const double[:, ::1] e, double x, double y, double eps) nogil:
    if _on_boundary(e, x, y, eps):
        return True
    return _parity(e, x, y)


cdef void _sort(double* a, Py_ssize_t n) nogil:
    cdef Py_ssize_t i, j
    cdef double v
    for i in range(1, n):
        v = a[i]
        j = i - 1
        while j >= 0 and a[j] > v:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = v


cdef bint _visible(const double[:, ::1] e, double px, double py, double qx, double qy,
                   double eps, double* cuts) nogil:
    cdef double ux, uy, length, tol, ax, ay, bx, by, da, db, ex, ey, la, dp, dq, t, tm
    cdef Py_ssize_t i, n
    if qx < px or (qx == px and qy < py):
        px, qx = qx, px
        py, qy = qy, py
    ux = qx - px
    uy = qy - py
    length = hypot(ux, uy)
    if length <= eps:
        return _in_closure(e, px, py, eps)
    tol = eps / length
    cuts[0] = 0.0
    cuts[1] = 1.0
    n = 2
    for i in range(e.shape[0]):
        ax = e[i, 0]
        ay = e[i, 1]
        bx = e[i, 2]
        by = e[i, 3]
        da = _cross(ux, uy, ax - px, ay - py) / length
        db = _cross(ux, uy, bx - px, by - py) / length
        if (da > eps and db < -eps) or (da < -eps and db > eps):
            ex = bx - ax
            ey = by - ay
            la = hypot(ex, ey)
            dp = _cross(ex, ey, px - ax, py - ay) / la
            dq = _cross(ex, ey, qx - ax, qy - ay) / la
            if (dp > eps and dq < -eps) or (dp < -eps and dq > eps):
                return False
        if -eps <= da <= eps:
            t = ((ax - px) * ux + (ay - py) * uy) / (length * length)
            if tol < t < 1.0 - tol:
                cuts[n] = t
                n += 1
    _sort(cuts, n)
    for i in range(n - 1):
        if cuts[i + 1] - cuts[i] <= 2.0 * tol:
            continue
        tm = 0.5 * (cuts[i] + cuts[i + 1])
        if not _in_closure(e, px + tm * ux, py + tm * uy, eps):
            return False
    return True


def on_boundary(const double[:, ::1] edges, double x, double y, double eps):
    return bool(_on_boundary(edges, x, y, eps))


def in_closure(const double[:, ::1] edges, double x, double y, double eps):
    return bool(_in_closure(edges, x, y, eps))


def in_interior(const double[:, ::1] edges, double x, double y, double eps):
    if _on_boundary(edges, x, y, eps):
        return False
    return bool(_parity(edges, x, y))


def segment_visible(const double[:, ::1] edges, double px, double py, double qx, double qy,
                    double eps):
    cdef double* cuts = <double*> malloc((edges.shape[0] + 2) * sizeof(double))
    cdef bint r
    if cuts == NULL:
        raise MemoryError()
    try:
        r = _visible(edges, px, py, qx, qy, eps, cuts)
    finally:
        free(cuts)
    return bool(r)


def visible_from(const double[:, ::1] edges, double px, double py, targets, double eps):
    cdef const double[:, ::1] tg = np.ascontiguousarray(targets, dtype=np.float64).reshape(-1, 2)
    cdef Py_ssize_t n = tg.shape[0]
    cdef Py_ssize_t k
    out = np.zeros(n, dtype=np.bool_)
    cdef cnp.npy_bool[::1] ov = out
    cdef double* cuts = <double*> malloc((edges.shape[0] + 2) * sizeof(double))
    if cuts == NULL:
        raise MemoryError()
    try:
        with nogil:
            for k in range(n):
                ov[k] = _visible(edges, px, py, tg[k, 0], tg[k, 1], eps, cuts)
    finally:
        free(cuts)
    return out


def points_in_free(const double[:, ::1] edges, pts, double eps, bint relaxed):
    cdef const double[:, ::1] p = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 2)
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t k
    cdef bint near
    out = np.zeros(n, dtype=np.bool_)
    cdef cnp.npy_bool[::1] ov = out
    with nogil:
        for k in range(n):
            near = _on_boundary(edges, p[k, 0], p[k, 1], eps)
            if relaxed:
                ov[k] = near or _parity(edges, p[k, 0], p[k, 1])
            else:
                ov[k] = (not near) and _parity(edges, p[k, 0], p[k, 1])
    return out


def segments_cross(const double[:, ::1] edges, segs, double eps):
    cdef const double[:, ::1] s = np.ascontiguousarray(segs, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t k, i
    cdef double px, py, qx, qy, ux, uy, length, ax, ay, bx, by, da, db, ex, ey, la, dp, dq
    out = np.zeros(n, dtype=np.bool_)
    cdef cnp.npy_bool[::1] ov = out
    with nogil:
        for k in range(n):
            px = s[k, 0]
            py = s[k, 1]
            qx = s[k, 2]
            qy = s[k, 3]
            ux = qx - px
            uy = qy - py
            length = hypot(ux, uy)
            if length < eps:
                length = eps
            for i in range(edges.shape[0]):
                ax = edges[i, 0]
                ay = edges[i, 1]
                bx = edges[i, 2]
                by = edges[i, 3]
                da = _cross(ux, uy, ax - px, ay - py) / length
                db = _cross(ux, uy, bx - px, by - py) / length
                if not ((da > eps and db < -eps) or (da < -eps and db > eps)):
                    continue
                ex = bx - ax
                ey = by - ay
                la = hypot(ex, ey)
                dp = _cross(ex, ey, px - ax, py - ay) / la
                dq = _cross(ex, ey, qx - ax, qy - ay) / la
                if (dp > eps and dq < -eps) or (dp < -eps and dq > eps):
                    ov[k] = True
                    break
    return out
