# cython: language_level=3
"""Compiled inner loops.

Each function here has a numpy twin with the same signature and the same
results in :mod:`actiscreen._fallback`; :mod:`actiscreen.kernels` picks one
at import time.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt
from libc.string cimport memmove

cnp.import_array()


def nearest_indices(const cnp.int64_t[::1] t_in, const cnp.int64_t[::1] grid):
    """Index of the input sample nearest to each grid time (ties -> earlier)."""
    cdef Py_ssize_t n = t_in.shape[0], m = grid.shape[0]
    cdef Py_ssize_t j = 0, k
    cdef cnp.int64_t g
    out = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    for k in range(m):
        g = grid[k]
        while j + 1 < n and t_in[j + 1] <= g:
            j += 1
        if j + 1 < n and g > t_in[j] and (t_in[j + 1] - g) < (g - t_in[j]):
            o[k] = j + 1
        else:
            o[k] = j
    return out


def stationary_mask(const double[::1] x, const double[::1] y, const double[::1] z,
                    Py_ssize_t w, double thr):
    """1 where the centred rolling std of all three axes is below ``thr``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, lo = 0, hi = 0, lo_i, hi_i, half = w // 2, cnt, k
    cdef double rx = x[0], ry = y[0], rz = z[0]
    cdef double sx = 0, sy = 0, sz = 0, qx = 0, qy = 0, qz = 0, v, thr2 = thr * thr
    cdef double vx, vy, vz
    cdef Py_ssize_t since_reset = 0
    out = np.zeros(n, dtype=np.uint8)
    cdef cnp.uint8_t[::1] o = out
    for i in range(n):
        lo_i = i - half
        if lo_i < 0:
            lo_i = 0
        hi_i = i - half + w
        if hi_i > n:
            hi_i = n
        if since_reset >= 65536:
            # bound drift of the running sums
            sx = sy = sz = qx = qy = qz = 0
            for k in range(lo_i, hi_i):
                v = x[k] - rx; sx += v; qx += v * v
                v = y[k] - ry; sy += v; qy += v * v
                v = z[k] - rz; sz += v; qz += v * v
            lo = lo_i
            hi = hi_i
            since_reset = 0
        else:
            while hi < hi_i:
                v = x[hi] - rx; sx += v; qx += v * v
                v = y[hi] - ry; sy += v; qy += v * v
                v = z[hi] - rz; sz += v; qz += v * v
                hi += 1
            while lo < lo_i:
                v = x[lo] - rx; sx -= v; qx -= v * v
                v = y[lo] - ry; sy -= v; qy -= v * v
                v = z[lo] - rz; sz -= v; qz -= v * v
                lo += 1
        since_reset += 1
        cnt = hi - lo
        vx = (qx - sx * sx / cnt) / cnt
        vy = (qy - sy * sy / cnt) / cnt
        vz = (qz - sz * sz / cnt) / cnt
        if vx < thr2 and vy < thr2 and vz < thr2:
            o[i] = 1
    return out


cdef inline Py_ssize_t _bisect_left(double* buf, Py_ssize_t size, double v) nogil:
    # branch-free lower bound
    cdef double* base = buf
    cdef Py_ssize_t half
    if size == 0:
        return 0
    while size > 1:
        half = size >> 1
        base = base + half if base[half] < v else base
        size -= half
    return (base - buf) + (base[0] < v)


def rolling_median(const double[::1] x, Py_ssize_t w):
    """Centred rolling median, window ``[i - w//2, i - w//2 + w)`` clipped."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, lo = 0, hi = 0, lo_i, hi_i, half = w // 2, size = 0, pos, q
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    buf_arr = np.empty(w + 1, dtype=np.float64)
    cdef double[::1] bufv = buf_arr
    cdef double* buf = &bufv[0]
    cdef double v, u
    with nogil:
        for i in range(n):
            lo_i = i - half
            if lo_i < 0:
                lo_i = 0
            hi_i = i - half + w
            if hi_i > n:
                hi_i = n
            # steady state: swap the outgoing value for the incoming one,
            # shifting only the elements between their two positions
            while hi < hi_i and lo < lo_i and lo < hi:
                u = x[lo]
                v = x[hi]
                pos = _bisect_left(buf, size, u)
                q = _bisect_left(buf, size, v)
                if q <= pos:
                    memmove(buf + q + 1, buf + q, (pos - q) * sizeof(double))
                    buf[q] = v
                else:
                    memmove(buf + pos, buf + pos + 1, (q - pos - 1) * sizeof(double))
                    buf[q - 1] = v
                lo += 1
                hi += 1
            while hi < hi_i:
                v = x[hi]
                pos = _bisect_left(buf, size, v)
                memmove(buf + pos + 1, buf + pos, (size - pos) * sizeof(double))
                buf[pos] = v
                size += 1
                hi += 1
            while lo < lo_i:
                v = x[lo]
                pos = _bisect_left(buf, size, v)
                memmove(buf + pos, buf + pos + 1, (size - pos - 1) * sizeof(double))
                size -= 1
                lo += 1
            if size & 1:
                o[i] = buf[size >> 1]
            else:
                o[i] = 0.5 * (buf[(size >> 1) - 1] + buf[size >> 1])
    return out


def sos_filter(const double[:, ::1] sos, const double[::1] x, const cnp.int64_t[::1] starts):
    """Cascade of biquads (transposed direct form II), zero state at each start."""
    cdef Py_ssize_t n = x.shape[0], ns = sos.shape[0], nseg = starts.shape[0]
    cdef Py_ssize_t s, i, seg, a, b
    cdef double v, yv
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    zi_arr = np.zeros((ns, 2), dtype=np.float64)
    cdef double[:, ::1] zi = zi_arr
    with nogil:
        for seg in range(nseg):
            a = starts[seg]
            b = starts[seg + 1] if seg + 1 < nseg else n
            for s in range(ns):
                zi[s, 0] = 0.0
                zi[s, 1] = 0.0
            for i in range(a, b):
                v = x[i]
                for s in range(ns):
                    yv = sos[s, 0] * v + zi[s, 0]
                    zi[s, 0] = sos[s, 1] * v - sos[s, 4] * yv + zi[s, 1]
                    zi[s, 1] = sos[s, 2] * v - sos[s, 5] * yv
                    v = yv
                o[i] = v
    return out


def sampen_counts(const double[::1] x, Py_ssize_t m, double r):
    """Template-pair match counts (A for length m+1, B for length m)."""
    cdef Py_ssize_t n = x.shape[0], nt = n - m, i, j, k
    cdef long long A = 0, B = 0
    cdef bint ok
    if nt < 2:
        return 0, 0
    with nogil:
        for i in range(nt - 1):
            for j in range(i + 1, nt):
                ok = True
                for k in range(m):
                    if fabs(x[i + k] - x[j + k]) > r:
                        ok = False
                        break
                if ok:
                    B += 1
                    if fabs(x[i + m] - x[j + m]) <= r:
                        A += 1
    return A, B


def level_best_splits(const double[:, ::1] xt, const cnp.int32_t[:, ::1] order,
                      const cnp.int32_t[::1] node_of, const double[::1] g,
                      const double[::1] h, const double[::1] g_node,
                      const double[::1] h_node, const cnp.int32_t[::1] feats,
                      Py_ssize_t n_nodes, double lam, double min_child_weight):
    """Best exact-greedy split per node for one tree level.

    ``xt`` is features x rows, ``order`` holds row indices sorted by value per
    feature, ``node_of`` maps rows to level-local node ids (-1 = inactive).
    """
    cdef Py_ssize_t n = order.shape[1], nf = feats.shape[0]
    cdef Py_ssize_t fi, f, i, r, nd
    cdef double xv, gl, hl, gr, hr, gain, parent
    best_gain_arr = np.zeros(n_nodes, dtype=np.float64)
    best_feat_arr = np.full(n_nodes, -1, dtype=np.int32)
    best_thr_arr = np.zeros(n_nodes, dtype=np.float64)
    GL_arr = np.zeros(n_nodes, dtype=np.float64)
    HL_arr = np.zeros(n_nodes, dtype=np.float64)
    last_arr = np.zeros(n_nodes, dtype=np.float64)
    seen_arr = np.zeros(n_nodes, dtype=np.uint8)
    score_arr = np.empty(n_nodes, dtype=np.float64)
    cdef double[::1] best_gain = best_gain_arr
    cdef cnp.int32_t[::1] best_feat = best_feat_arr
    cdef double[::1] best_thr = best_thr_arr
    cdef double[::1] GL = GL_arr
    cdef double[::1] HL = HL_arr
    cdef double[::1] last = last_arr
    cdef cnp.uint8_t[::1] seen = seen_arr
    cdef double[::1] parent_score = score_arr
    with nogil:
        for nd in range(n_nodes):
            parent_score[nd] = g_node[nd] * g_node[nd] / (h_node[nd] + lam)
        for fi in range(nf):
            f = feats[fi]
            for nd in range(n_nodes):
                GL[nd] = 0.0
                HL[nd] = 0.0
                seen[nd] = 0
            for i in range(n):
                r = order[f, i]
                nd = node_of[r]
                if nd < 0:
                    continue
                xv = xt[f, r]
                if seen[nd] and xv > last[nd]:
                    hl = HL[nd]
                    hr = h_node[nd] - hl
                    if hl >= min_child_weight and hr >= min_child_weight:
                        gl = GL[nd]
                        gr = g_node[nd] - gl
                        gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam)
                                      - parent_score[nd])
                        if gain > best_gain[nd]:
                            best_gain[nd] = gain
                            best_feat[nd] = <cnp.int32_t>f
                            best_thr[nd] = 0.5 * (last[nd] + xv)
                GL[nd] += g[r]
                HL[nd] += h[r]
                last[nd] = xv
                seen[nd] = 1
    return best_gain_arr, best_feat_arr, best_thr_arr
