# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Euler stencil kernel (see ``_fallback.euler`` for the reference)."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline double _sat(double v) noexcept nogil:
    # clip form of the piecewise-linear output; exact once saturated
    if v > 1.0:
        return 1.0
    if v < -1.0:
        return -1.0
    return v


def saturate(state):
    return np.clip(state, -1.0, 1.0)


cdef inline void _axpy(double* acc, double w, const double* y, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t j
    for j in range(n):
        acc[j] = acc[j] + w * y[j]


cdef inline void _ghost(double* yp, Py_ssize_t i, Py_ssize_t j, Py_ssize_t H,
                        Py_ssize_t W, Py_ssize_t r, bint fixed, double bval) noexcept nogil:
    cdef Py_ssize_t ii, jj
    cdef Py_ssize_t Wp = W + 2 * r
    if fixed:
        yp[i * Wp + j] = bval
    else:
        # placeholder; zero-flux border cells are recomputed by _border_acc
        ii = min(max(i - r, 0), H - 1)
        jj = min(max(j - r, 0), W - 1)
        yp[i * Wp + j] = yp[(ii + r) * Wp + jj + r]


cdef inline double _border_acc(const double* yp, Py_ssize_t i, Py_ssize_t j, Py_ssize_t H,
                               Py_ssize_t W, Py_ssize_t r, const double* wt,
                               const Py_ssize_t* dk, const Py_ssize_t* dl,
                               Py_ssize_t ntaps) noexcept nogil:
    # zero flux: an out-of-grid neighbour reads the centre cell itself
    cdef Py_ssize_t Wp = W + 2 * r
    cdef Py_ssize_t t, ii, jj
    cdef double acc = 0.0
    cdef double centre = yp[(i + r) * Wp + j + r]
    for t in range(ntaps):
        ii = i + dk[t] - r
        jj = j + dl[t] - r
        if ii < 0 or ii >= H or jj < 0 or jj >= W:
            acc = acc + wt[t] * centre
        else:
            acc = acc + wt[t] * yp[(ii + r) * Wp + jj + r]
    return acc


cdef void _fill_ghosts(double* yp, Py_ssize_t H, Py_ssize_t W, Py_ssize_t r,
                       bint fixed, double bval) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(r):
        for j in range(W + 2 * r):
            _ghost(yp, i, j, H, W, r, fixed, bval)
            _ghost(yp, H + r + i, j, H, W, r, fixed, bval)
    for i in range(r, H + r):
        for j in range(r):
            _ghost(yp, i, j, H, W, r, fixed, bval)
            _ghost(yp, i, W + r + j, H, W, r, fixed, bval)


def euler(state, bias, weights, double h, Py_ssize_t n_steps, bint fixed, double bval):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] xa = np.array(state, dtype=np.float64, copy=True, order="C")
    cdef const double[:, :, ::1] bv = np.ascontiguousarray(bias, dtype=np.float64)
    cdef double[:, :, ::1] xv = xa
    Ad = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t side = Ad.shape[0]
    cdef Py_ssize_t r = side // 2
    di_l, dj_l, w_l = [], [], []
    for k in range(side):
        for l in range(side):
            if Ad[k, l] != 0.0:
                di_l.append(k)
                dj_l.append(l)
                w_l.append(Ad[k, l])
    cdef double[::1] wt = np.array(w_l, dtype=np.float64)
    cdef Py_ssize_t ntaps = wt.shape[0]
    cdef Py_ssize_t nb = xv.shape[0], H = xv.shape[1], W = xv.shape[2]
    cdef double[:, ::1] yp = np.empty((H + 2 * r, W + 2 * r), dtype=np.float64)
    cdef Py_ssize_t Wp = W + 2 * r
    cdef Py_ssize_t[::1] off = np.array([k * Wp + l for k, l in zip(di_l, dj_l)], dtype=np.intp)
    cdef Py_ssize_t[::1] dk = np.array(di_l + [0], dtype=np.intp)
    cdef Py_ssize_t[::1] dl = np.array(dj_l + [0], dtype=np.intp)
    cdef Py_ssize_t[::1] border = np.array(
        [j for j in range(W) if j < r or j >= W - r] + [0], dtype=np.intp)
    cdef Py_ssize_t nborder = border.shape[0] - 1
    cdef Py_ssize_t q
    cdef Py_ssize_t s, b, i, j, t, base
    cdef double xc
    cdef double* yflat = &yp[0, 0]
    cdef double[::1] accbuf = np.empty(max(W, 1), dtype=np.float64)
    cdef double* accp = &accbuf[0]
    cdef double* xrow
    cdef const double* brow
    with nogil:
        for b in range(nb):
            for s in range(n_steps):
                for i in range(H):
                    xrow = &xv[b, i, 0]
                    for j in range(W):
                        yflat[(i + r) * Wp + j + r] = _sat(xrow[j])
                _fill_ghosts(yflat, H, W, r, fixed, bval)
                for i in range(H):
                    xrow = &xv[b, i, 0]
                    brow = &bv[b, i, 0]
                    base = i * Wp
                    for j in range(W):
                        accp[j] = 0.0
                    for t in range(ntaps):
                        _axpy(accp, wt[t], yflat + base + off[t], W)
                    if not fixed:
                        if i < r or i >= H - r:
                            for j in range(W):
                                accp[j] = _border_acc(yflat, i, j, H, W, r, &wt[0] if ntaps else NULL,
                                                      &dk[0], &dl[0], ntaps)
                        else:
                            for q in range(nborder):
                                j = border[q]
                                accp[j] = _border_acc(yflat, i, j, H, W, r, &wt[0] if ntaps else NULL,
                                                      &dk[0], &dl[0], ntaps)
                    for j in range(W):
                        xc = xrow[j]
                        xrow[j] = xc + h * ((-xc + accp[j]) + brow[j])
    return xa
