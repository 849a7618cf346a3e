# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for TNC profit evaluation; see ``_pykernels`` for the reference."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


cdef inline double _od_terms(
    const double* base6, double lam0, double la, double di, double dj,
    double alpha, double gamma, double eps, double c_av, double k,
    double b, double ri, double rj, double wi, double wj,
    double* out, bint want_grad,
) noexcept nogil:
    """Per OD/class margin sum; fills out[0:5] with d/d(b, ri, rj, wi, wj) when asked."""
    cdef double c[6]
    cdef double p[6]
    cdef double zmax, tot, s
    cdef double ma, mb1, mb2, mb3, pa, pb1, pb2, pb3
    cdef double d_m, d_mc, e, em
    cdef int t

    c[0] = base6[0] + alpha * wi + gamma * (b + ri * la)
    c[1] = base6[1]
    c[2] = base6[2] + alpha * wi + gamma * (b + ri * di)
    c[3] = base6[3] + alpha * wj + gamma * (b + rj * dj)
    c[4] = base6[4] + alpha * (wi + wj) + gamma * (2.0 * b + ri * di + rj * dj)
    c[5] = base6[5]
    zmax = -eps * c[0]
    for t in range(1, 6):
        if -eps * c[t] > zmax:
            zmax = -eps * c[t]
    tot = 0.0
    for t in range(6):
        p[t] = exp(-eps * c[t] - zmax)
        tot += p[t]
    pa = p[0] / tot
    pb1 = p[2] / tot
    pb2 = p[3] / tot
    pb3 = p[4] / tot

    ma = b + (ri - k) * la - c_av * wi
    mb1 = b + (ri - k) * di - c_av * wi
    mb2 = b + (rj - k) * dj - c_av * wj
    mb3 = 2.0 * b + (ri - k) * di + (rj - k) * dj - c_av * (wi + wj)
    s = pa * ma + pb1 * mb1 + pb2 * mb2 + pb3 * mb3
    if not want_grad:
        return lam0 * s

    # base fare
    d_m = pa + pb1 + pb2 + 2.0 * pb3
    d_mc = pa * ma + pb1 * mb1 + pb2 * mb2 + 2.0 * pb3 * mb3
    out[0] = lam0 * (d_m - eps * gamma * (d_mc - s * d_m))
    # origin rate
    d_m = pa * la + pb1 * di + pb3 * di
    d_mc = pa * ma * la + pb1 * mb1 * di + pb3 * mb3 * di
    out[1] = lam0 * (d_m - eps * gamma * (d_mc - s * d_m))
    # destination rate
    d_m = pb2 * dj + pb3 * dj
    d_mc = pb2 * mb2 * dj + pb3 * mb3 * dj
    out[2] = lam0 * (d_m - eps * gamma * (d_mc - s * d_m))
    # origin wait
    e = pa + pb1 + pb3
    em = pa * ma + pb1 * mb1 + pb3 * mb3
    out[3] = lam0 * (-c_av * e - eps * alpha * (em - s * e))
    # destination wait
    e = pb2 + pb3
    em = pb2 * mb2 + pb3 * mb3
    out[4] = lam0 * (-c_av * e - eps * alpha * (em - s * e))
    return lam0 * s


def tnc_objective(
    const double[:, :, :] lam0, const double[:, :, :, ::1] base, const double[:, :] la,
    const double[:] d, const double[:] alpha, const double[:] gamma,
    double eps, double c_av, double v_a, double b,
    const double[:] r, const double[:] w, const double[:] origin_w, const double[:] dest_w,
    bint want_grad=True,
):
    cdef Py_ssize_t m = lam0.shape[0]
    cdef Py_ssize_t nk = lam0.shape[2]
    cdef Py_ssize_t i, j, kk
    cdef double k = c_av / v_a
    cdef double value = 0.0, g_b = 0.0, wgt
    cdef double out[5]
    g_r_arr = np.zeros(m)
    g_w_arr = np.zeros(m)
    cdef double[:] g_r = g_r_arr
    cdef double[:] g_w = g_w_arr

    with nogil:
        for i in range(m):
            if origin_w[i] == 0.0:
                continue
            for j in range(m):
                if dest_w[j] == 0.0:
                    continue
                wgt = origin_w[i] * dest_w[j]
                for kk in range(nk):
                    value += wgt * _od_terms(
                        &base[i, j, kk, 0], lam0[i, j, kk], la[i, j], d[i], d[j],
                        alpha[kk], gamma[kk], eps, c_av, k,
                        b, r[i], r[j], w[i], w[j], out, want_grad,
                    )
                    if want_grad:
                        g_b += wgt * out[0]
                        g_r[i] += wgt * out[1]
                        g_r[j] += wgt * out[2]
                        g_w[i] += wgt * out[3]
                        g_w[j] += wgt * out[4]
    if not want_grad:
        return value, None, None, None
    return value, g_b, g_r_arr, g_w_arr


def origin_grid(
    const double[:, :, :] lam0, const double[:, :, :, ::1] base, const double[:, :] la,
    const double[:] d_orig, const double[:] d_dest, const double[:] alpha, const double[:] gamma,
    double eps, double c_av, double v_a, double b,
    const double[:] r_dest, const double[:] w_dest,
    const double[:, :] r_vals, const double[:, :] w_vals,
):
    cdef Py_ssize_t ni = lam0.shape[0]
    cdef Py_ssize_t nj = lam0.shape[1]
    cdef Py_ssize_t nk = lam0.shape[2]
    cdef Py_ssize_t ng = r_vals.shape[1]
    cdef Py_ssize_t i, g, j, kk
    cdef double k = c_av / v_a
    cdef double acc
    cdef double out[5]
    res_arr = np.empty((ni, ng))
    cdef double[:, :] res = res_arr

    with nogil:
        for i in range(ni):
            for g in range(ng):
                acc = 0.0
                for j in range(nj):
                    for kk in range(nk):
                        acc += _od_terms(
                            &base[i, j, kk, 0], lam0[i, j, kk], la[i, j], d_orig[i], d_dest[j],
                            alpha[kk], gamma[kk], eps, c_av, k,
                            b, r_vals[i, g], r_dest[j], w_vals[i, g], w_dest[j], out, False,
                        )
                res[i, g] = acc
    return res_arr
