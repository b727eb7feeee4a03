# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled cone-algebra kernels (twin of ``_kernels_py``).

Same signatures and same arithmetic as the pure-numpy fallback; the win is
removing per-block Python overhead in the interior-point inner loop, which
is dominated by many small second-order cone blocks.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, sqrt

cnp.import_array()

BACKEND = "compiled"

ctypedef cnp.float64_t f64
ctypedef cnp.int64_t i64


def identity(int l, i64[::1] starts, i64[::1] dims, int m):
    out = np.zeros(m)
    cdef f64[::1] e = out
    cdef Py_ssize_t i
    for i in range(l):
        e[i] = 1.0
    for i in range(starts.shape[0]):
        e[starts[i]] = 1.0
    return out


def min_eig(cnp.ndarray[f64, ndim=1] u_arr, int l, i64[::1] starts, i64[::1] dims):
    cdef f64[::1] u = u_arr
    cdef double worst = INFINITY
    cdef double nrm
    cdef Py_ssize_t i, b, st, d, j
    for i in range(l):
        if u[i] < worst:
            worst = u[i]
    for b in range(starts.shape[0]):
        st = starts[b]
        d = dims[b]
        nrm = 0.0
        for j in range(st + 1, st + d):
            nrm += u[j] * u[j]
        nrm = u[st] - sqrt(nrm)
        if nrm < worst:
            worst = nrm
    return worst


def compute_scaling(
    cnp.ndarray[f64, ndim=1] s_arr,
    cnp.ndarray[f64, ndim=1] z_arr,
    int l,
    i64[::1] starts,
    i64[::1] dims,
):
    cdef f64[::1] s = s_arr
    cdef f64[::1] z = z_arr
    cdef Py_ssize_t m = s_arr.shape[0]
    cdef Py_ssize_t nsoc = starts.shape[0]

    d_out = np.empty(l)
    lam_out = np.empty(m)
    v_out = np.zeros(m - l)
    beta_out = np.empty(nsoc)
    cdef f64[::1] d = d_out
    cdef f64[::1] lam = lam_out
    cdef f64[::1] v = v_out
    cdef f64[::1] beta = beta_out

    cdef Py_ssize_t i, b, st, dim, j
    cdef double a_s, a_z, dot_sz, gamma, w0, v0, coef, inv_as, inv_az, bscale
    for i in range(l):
        d[i] = sqrt(s[i] / z[i])
        lam[i] = sqrt(s[i] * z[i])
    for b in range(nsoc):
        st = starts[b]
        dim = dims[b]
        a_s = 0.0
        a_z = 0.0
        dot_sz = 0.0
        for j in range(st + 1, st + dim):
            a_s += s[j] * s[j]
            a_z += z[j] * z[j]
            dot_sz += s[j] * z[j]
        # clamp guards against roundoff right at the cone boundary
        a_s = s[st] * s[st] - a_s
        if a_s < 1e-28 * s[st] * s[st]:
            a_s = 1e-28 * s[st] * s[st]
        a_z = z[st] * z[st] - a_z
        if a_z < 1e-28 * z[st] * z[st]:
            a_z = 1e-28 * z[st] * z[st]
        a_s = sqrt(a_s)
        a_z = sqrt(a_z)
        inv_as = 1.0 / a_s
        inv_az = 1.0 / a_z
        dot_sz = (s[st] * z[st] + dot_sz) * inv_as * inv_az
        gamma = sqrt((1.0 + dot_sz) / 2.0)
        # NT point, then its Jordan square root (unit hyperbolic norm)
        w0 = (s[st] * inv_as + z[st] * inv_az) / (2.0 * gamma)
        v0 = sqrt((w0 + 1.0) / 2.0)
        v[st - l] = v0
        for j in range(st + 1, st + dim):
            v[st - l + j - st] = (s[j] * inv_as - z[j] * inv_az) / (2.0 * gamma) / (2.0 * v0)
        beta[b] = sqrt(a_s * inv_az)
        # lam = beta * (2 v (v.z) - J z)
        coef = v0 * z[st]
        for j in range(st + 1, st + dim):
            coef += v[st - l + j - st] * z[j]
        coef *= 2.0
        bscale = beta[b]
        lam[st] = bscale * (coef * v0 - z[st])
        for j in range(st + 1, st + dim):
            lam[j] = bscale * (coef * v[st - l + j - st] + z[j])
    return d_out, v_out, beta_out, lam_out


def apply_w(
    cnp.ndarray[f64, ndim=1] x_arr,
    cnp.ndarray[f64, ndim=1] d_arr,
    cnp.ndarray[f64, ndim=1] v_arr,
    cnp.ndarray[f64, ndim=1] beta_arr,
    int l,
    i64[::1] starts,
    i64[::1] dims,
    bint inverse,
):
    cdef f64[::1] x = x_arr
    cdef f64[::1] d = d_arr
    cdef f64[::1] v = v_arr
    cdef f64[::1] beta = beta_arr
    out = np.empty(x_arr.shape[0])
    cdef f64[::1] y = out
    cdef Py_ssize_t i, b, st, dim, j
    cdef double coef, bscale
    if inverse:
        for i in range(l):
            y[i] = x[i] / d[i]
    else:
        for i in range(l):
            y[i] = x[i] * d[i]
    for b in range(starts.shape[0]):
        st = starts[b]
        dim = dims[b]
        bscale = beta[b]
        if inverse:
            # W^{-1} = (1/beta) (2 (Jv)(Jv)^T - J)
            coef = v[st - l] * x[st]
            for j in range(st + 1, st + dim):
                coef -= v[st - l + j - st] * x[j]
            coef *= 2.0
            y[st] = (coef * v[st - l] - x[st]) / bscale
            for j in range(st + 1, st + dim):
                y[j] = (-coef * v[st - l + j - st] + x[j]) / bscale
        else:
            coef = 0.0
            for j in range(st, st + dim):
                coef += v[st - l + j - st] * x[j]
            coef *= 2.0
            y[st] = bscale * (coef * v[st - l] - x[st])
            for j in range(st + 1, st + dim):
                y[j] = bscale * (coef * v[st - l + j - st] + x[j])
    return out


def apply_w_mat(
    cnp.ndarray[f64, ndim=2] x_arr,
    cnp.ndarray[f64, ndim=1] d_arr,
    cnp.ndarray[f64, ndim=1] v_arr,
    cnp.ndarray[f64, ndim=1] beta_arr,
    int l,
    i64[::1] starts,
    i64[::1] dims,
    bint inverse,
):
    cdef f64[:, ::1] x = np.ascontiguousarray(x_arr)
    cdef f64[::1] d = d_arr
    cdef f64[::1] v = v_arr
    cdef f64[::1] beta = beta_arr
    cdef Py_ssize_t ncols = x.shape[1]
    out = np.empty((x.shape[0], ncols))
    cdef f64[:, ::1] y = out
    cdef Py_ssize_t i, b, st, dim, j, c
    cdef double coef, bscale
    for i in range(l):
        if inverse:
            for c in range(ncols):
                y[i, c] = x[i, c] / d[i]
        else:
            for c in range(ncols):
                y[i, c] = x[i, c] * d[i]
    for b in range(starts.shape[0]):
        st = starts[b]
        dim = dims[b]
        bscale = beta[b]
        for c in range(ncols):
            if inverse:
                coef = v[st - l] * x[st, c]
                for j in range(st + 1, st + dim):
                    coef -= v[st - l + j - st] * x[j, c]
                coef *= 2.0
                y[st, c] = (coef * v[st - l] - x[st, c]) / bscale
                for j in range(st + 1, st + dim):
                    y[j, c] = (-coef * v[st - l + j - st] + x[j, c]) / bscale
            else:
                coef = 0.0
                for j in range(st, st + dim):
                    coef += v[st - l + j - st] * x[j, c]
                coef *= 2.0
                y[st, c] = bscale * (coef * v[st - l] - x[st, c])
                for j in range(st + 1, st + dim):
                    y[j, c] = bscale * (coef * v[st - l + j - st] + x[j, c])
    return out


def jordan_mul(
    cnp.ndarray[f64, ndim=1] u_arr,
    cnp.ndarray[f64, ndim=1] w_arr,
    int l,
    i64[::1] starts,
    i64[::1] dims,
):
    cdef f64[::1] u = u_arr
    cdef f64[::1] w = w_arr
    out = np.empty(u_arr.shape[0])
    cdef f64[::1] y = out
    cdef Py_ssize_t i, b, st, dim, j
    cdef double dot, u0, w0
    for i in range(l):
        y[i] = u[i] * w[i]
    for b in range(starts.shape[0]):
        st = starts[b]
        dim = dims[b]
        u0 = u[st]
        w0 = w[st]
        dot = 0.0
        for j in range(st, st + dim):
            dot += u[j] * w[j]
        y[st] = dot
        for j in range(st + 1, st + dim):
            y[j] = u0 * w[j] + w0 * u[j]
    return out


def jordan_solve(
    cnp.ndarray[f64, ndim=1] lam_arr,
    cnp.ndarray[f64, ndim=1] w_arr,
    int l,
    i64[::1] starts,
    i64[::1] dims,
):
    cdef f64[::1] lam = lam_arr
    cdef f64[::1] w = w_arr
    out = np.empty(w_arr.shape[0])
    cdef f64[::1] y = out
    cdef Py_ssize_t i, b, st, dim, j
    cdef double det, x0, dot, l0
    for i in range(l):
        y[i] = w[i] / lam[i]
    for b in range(starts.shape[0]):
        st = starts[b]
        dim = dims[b]
        l0 = lam[st]
        det = l0 * l0
        dot = 0.0
        for j in range(st + 1, st + dim):
            det -= lam[j] * lam[j]
            dot += lam[j] * w[j]
        x0 = (l0 * w[st] - dot) / det
        y[st] = x0
        for j in range(st + 1, st + dim):
            y[j] = (w[j] - x0 * lam[j]) / l0
    return out


def max_step(
    cnp.ndarray[f64, ndim=1] u_arr,
    cnp.ndarray[f64, ndim=1] du_arr,
    int l,
    i64[::1] starts,
    i64[::1] dims,
):
    cdef f64[::1] u = u_arr
    cdef f64[::1] du = du_arr
    cdef double t_max = INFINITY
    cdef Py_ssize_t i, b, st, dim, j
    cdef double a, bb, c, disc, sq, r1, r2, block_t, cand, guard
    for i in range(l):
        if du[i] < 0.0:
            cand = u[i] / -du[i]
            if cand < t_max:
                t_max = cand
    for b in range(starts.shape[0]):
        st = starts[b]
        dim = dims[b]
        a = du[st] * du[st]
        bb = u[st] * du[st]
        c = u[st] * u[st]
        for j in range(st + 1, st + dim):
            a -= du[j] * du[j]
            bb -= u[j] * du[j]
            c -= u[j] * u[j]
        if c < 0.0:
            return 0.0
        guard = 1e-12 * (1.0 if fabs(u[st]) < 1.0 else fabs(u[st]))
        block_t = INFINITY
        if fabs(a) > 1e-14:
            disc = bb * bb - a * c
            if disc >= 0.0:
                sq = sqrt(disc)
                r1 = (-bb - sq) / a
                r2 = (-bb + sq) / a
                if r1 > 1e-14 and u[st] + r1 * du[st] >= -guard and r1 < block_t:
                    block_t = r1
                if r2 > 1e-14 and u[st] + r2 * du[st] >= -guard and r2 < block_t:
                    block_t = r2
        elif fabs(bb) > 1e-14:
            r1 = -c / (2.0 * bb)
            if r1 > 1e-14 and u[st] + r1 * du[st] >= -guard:
                block_t = r1
        if block_t < t_max:
            t_max = block_t
    return t_max
