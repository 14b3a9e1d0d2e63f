# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled element kernels; same contract as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow, fabs

cnp.import_array()


def assemble_elements(const double[:, :, ::1] grads, const double[::1] vols,
                      const double[:, ::1] uel, const double[:, ::1] lam,
                      const double[::1] w, double p, double alpha, double expo,
                      double n, double delta):
    cdef Py_ssize_t E = grads.shape[0], k = grads.shape[1], d = grads.shape[2]
    cdef Py_ssize_t Q = lam.shape[0]
    res_a = np.zeros((E, k))
    jac_a = np.zeros((E, k, k))
    kcoef_a = np.zeros(E)
    cdef double[:, ::1] res = res_a
    cdef double[:, :, ::1] jac = jac_a
    cdef double[::1] kcoef = kcoef_a
    cdef double g[3]
    cdef double D[3][3]
    cdef double gphi_g[4]
    cdef double dbbar[4]
    cdef double gDg
    cdef Py_ssize_t e, i, j, a, c, q
    cdef double uq, t, base, bq, dbq, bbar, s, sd, coef, coef_d, vol
    cdef double half = 0.5 * (p - 2.0)
    for e in range(E):
        vol = vols[e]
        for a in range(d):
            g[a] = 0.0
            for i in range(k):
                g[a] += grads[e, i, a] * uel[e, i]
        bbar = 0.0
        for i in range(k):
            dbbar[i] = 0.0
        for q in range(Q):
            uq = 0.0
            for i in range(k):
                uq += lam[q, i] * uel[e, i]
            t = fabs(uq)
            if t > n:
                t = n
            base = 1.0 + t
            bq = alpha * pow(base, -expo)
            bbar += w[q] * bq
            if fabs(uq) <= n:
                dbq = -expo * alpha * pow(base, -expo - 1.0)
                if uq < 0:
                    dbq = -dbq
                for i in range(k):
                    dbbar[i] += w[q] * dbq * lam[q, i]
        s = 0.0
        for a in range(d):
            s += g[a] * g[a]
        coef = pow(s, half) if s > 0 else 0.0
        sd = s + delta * delta
        if sd > 0:
            coef_d = pow(sd, half)
        elif p == 2.0:
            coef_d = 1.0
        else:
            coef_d = 0.0
        for a in range(d):
            for c in range(d):
                D[a][c] = (1.0 if a == c else 0.0)
                if sd > 0:
                    D[a][c] += (p - 2.0) * g[a] * g[c] / sd
                D[a][c] *= coef_d
        for i in range(k):
            gphi_g[i] = 0.0
            for a in range(d):
                gphi_g[i] += grads[e, i, a] * g[a]
            res[e, i] = vol * bbar * coef * gphi_g[i]
        for i in range(k):
            for j in range(k):
                gDg = 0.0
                for a in range(d):
                    for c in range(d):
                        gDg += grads[e, i, a] * D[a][c] * grads[e, j, c]
                jac[e, i, j] = vol * bbar * gDg + vol * coef * gphi_g[i] * dbbar[j]
        kcoef[e] = bbar * coef_d
    return res_a, jac_a, kcoef_a


cdef inline double _fraction_above(double* v, Py_ssize_t k, double t) nogil:
    cdef double a, b, c
    if k == 2:
        a = v[0]; b = v[1]
        if t < a:
            return 1.0
        if t < b:
            return (b - t) / (b - a)
        return 0.0
    a = v[0]; b = v[1]; c = v[2]
    if t < a:
        return 1.0
    if t < b:
        return 1.0 - (t - a) * (t - a) / ((c - a) * (b - a))
    if t < c:
        return (c - t) * (c - t) / ((c - a) * (c - b))
    return 0.0


def superlevel_measure(vals, const double[::1] vols, const double[::1] ts):
    cdef double[:, ::1] v = np.ascontiguousarray(np.sort(vals, axis=1), dtype=np.float64)
    cdef Py_ssize_t P = v.shape[0], k = v.shape[1], T = ts.shape[0]
    out_a = np.zeros(T)
    cdef double[::1] out = out_a
    cdef Py_ssize_t i, r
    cdef double acc
    with nogil:
        for i in range(T):
            acc = 0.0
            for r in range(P):
                acc += vols[r] * _fraction_above(&v[r, 0], k, ts[i])
            out[i] = acc
    return out_a
