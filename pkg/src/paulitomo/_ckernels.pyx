# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched estimator kernels; see paulitomo._pykernels for the contract."""
import numpy as np
from libc.math cimport sqrt, NAN

cdef double[4] _A = [1.0, 1.0, -1.0, -1.0]
cdef double[4] _B = [1.0, -1.0, 1.0, -1.0]


def correlations(counts):
    cdef double[:, :, :, ::1] c = np.ascontiguousarray(counts, dtype=np.float64)
    cdef Py_ssize_t nb = c.shape[0]
    vals_arr = np.zeros((nb, 4, 4))
    err_arr = np.zeros((nb, 4, 4))
    cdef double[:, :, ::1] vals = vals_arr
    cdef double[:, :, ::1] err = err_arr
    cdef double[3] row_s, row_n, col_s, col_n
    cdef double tot, sab, sa, sb, v, x
    cdef Py_ssize_t k, al, be, o
    for k in range(nb):
        for al in range(3):
            row_s[al] = 0.0
            row_n[al] = 0.0
            col_s[al] = 0.0
            col_n[al] = 0.0
        for al in range(3):
            for be in range(3):
                tot = 0.0
                sab = 0.0
                sa = 0.0
                sb = 0.0
                for o in range(4):
                    x = c[k, al, be, o]
                    tot += x
                    sab += _A[o] * _B[o] * x
                    sa += _A[o] * x
                    sb += _B[o] * x
                v = sab / tot
                vals[k, al + 1, be + 1] = v
                err[k, al + 1, be + 1] = sqrt(max(1.0 - v * v, 0.0) / tot)
                row_s[al] += sa
                row_n[al] += tot
                col_s[be] += sb
                col_n[be] += tot
        vals[k, 0, 0] = 1.0
        for al in range(3):
            v = row_s[al] / row_n[al]
            vals[k, al + 1, 0] = v
            err[k, al + 1, 0] = sqrt(max(1.0 - v * v, 0.0) / row_n[al])
            v = col_s[al] / col_n[al]
            vals[k, 0, al + 1] = v
            err[k, 0, al + 1] = sqrt(max(1.0 - v * v, 0.0) / col_n[al])
    return vals_arr, err_arr


def states(values, qtab, long reference):
    cdef double[:, :, ::1] s = np.ascontiguousarray(values, dtype=np.float64)
    cdef double complex[:, :, :, :, ::1] q = np.ascontiguousarray(qtab, dtype=np.complex128)
    cdef Py_ssize_t nb = s.shape[0]
    psi_arr = np.empty((nb, 2, 2), dtype=np.complex128)
    p_arr = np.empty(nb)
    ref_arr = np.empty(nb, dtype=np.int64)
    cdef double complex[:, :, ::1] psi = psi_arr
    cdef double[::1] p = p_arr
    cdef long long[::1] ref = ref_arr
    cdef Py_ssize_t k, r, n, m, i, j, best
    cdef double pr, pbest, norm
    cdef double complex acc
    for k in range(nb):
        if reference < 0:
            best = 0
            pbest = -1e300
            for r in range(4):
                pr = 0.0
                for i in range(4):
                    for j in range(4):
                        pr += q[r, r // 2, r % 2, i, j].real * s[k, i, j]
                pr *= 0.25
                if pr > pbest:
                    pbest = pr
                    best = r
        else:
            best = reference
            pbest = 0.0
            for i in range(4):
                for j in range(4):
                    pbest += q[best, best // 2, best % 2, i, j].real * s[k, i, j]
            pbest *= 0.25
        p[k] = pbest
        ref[k] = best
        if pbest <= 0.0:
            for n in range(2):
                for m in range(2):
                    psi[k, n, m] = NAN
            continue
        norm = 0.25 / sqrt(pbest)
        for n in range(2):
            for m in range(2):
                acc = 0.0
                for i in range(4):
                    for j in range(4):
                        acc = acc + q[best, n, m, i, j] * s[k, i, j]
                psi[k, n, m] = acc * norm
        psi[k, best // 2, best % 2] = sqrt(pbest)
    return psi_arr, p_arr, ref_arr


def unitaries(psi_out, psi_in):
    cdef double complex[:, :, ::1] o = np.ascontiguousarray(psi_out, dtype=np.complex128)
    cdef double complex[:, :, ::1] a = np.ascontiguousarray(psi_in, dtype=np.complex128)
    cdef Py_ssize_t nb = a.shape[0]
    u_arr = np.empty((nb, 2, 2), dtype=np.complex128)
    det_arr = np.empty(nb, dtype=np.complex128)
    cdef double complex[:, :, ::1] u = u_arr
    cdef double complex[::1] det = det_arr
    cdef double complex d, i00, i01, i10, i11
    cdef Py_ssize_t k
    for k in range(nb):
        d = a[k, 0, 0] * a[k, 1, 1] - a[k, 0, 1] * a[k, 1, 0]
        det[k] = d
        i00 = a[k, 1, 1] / d
        i01 = -a[k, 0, 1] / d
        i10 = -a[k, 1, 0] / d
        i11 = a[k, 0, 0] / d
        u[k, 0, 0] = o[k, 0, 0] * i00 + o[k, 0, 1] * i10
        u[k, 0, 1] = o[k, 0, 0] * i01 + o[k, 0, 1] * i11
        u[k, 1, 0] = o[k, 1, 0] * i00 + o[k, 1, 1] * i10
        u[k, 1, 1] = o[k, 1, 0] * i01 + o[k, 1, 1] * i11
    return u_arr, det_arr
