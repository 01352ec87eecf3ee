# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled product-quadrature accumulation kernel."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.math cimport exp, sqrt

cdef extern from "complex.h":
    double cabs(double complex) nogil

cnp.import_array()


def accumulate(const double complex[:, :, :, ::1] F, const long long[::1] fgroup,
               const double complex[:, :, :, ::1] G, const long long[::1] kpow,
               const double[:, :, ::1] U, const long long[:, ::1] index,
               const double[::1] weight, int ngroups,
               const long long[::1] pair_t, const long long[::1] pair_g,
               int mode=0, double exclude=0.0):
    cdef Py_ssize_t C = F.shape[0], s = F.shape[1], nt = F.shape[2], ntau = F.shape[3]
    cdef Py_ssize_t T = G.shape[0], D = index.shape[0], P = pair_t.shape[0]
    cdef Py_ssize_t l, c, t, d, g, j, m, q, kmax = 0, k
    cdef long long ntot = 1, it, rem
    cdef double b, inv, usum, total = 0.0, pre, cut, x
    cdef double complex p, v
    cdef int th[8]
    cdef long long ii[8]
    cdef double uu[8]
    cdef double pw[16]
    cdef Py_ssize_t urow[8]
    if s > 8:
        raise ValueError("at most 8 factors")
    for t in range(T):
        if kpow[t] > kmax:
            kmax = kpow[t]
    if kmax > 15:
        raise ValueError("B power too large")
    for l in range(s):
        ntot *= nt
    out = np.zeros(P, dtype=np.complex128)
    cdef double complex[::1] acc = out
    if C == 0 or T == 0 or P == 0:
        return out if mode == 0 else 0.0
    cdef const double complex *fp = &F[0, 0, 0, 0]
    cdef const double complex *gp = &G[0, 0, 0, 0]
    cdef const double *up = &U[0, 0, 0]
    cdef double complex *phi = <double complex *> malloc(ngroups * sizeof(double complex))
    cdef double complex *gprod = <double complex *> malloc(T * sizeof(double complex))
    cdef Py_ssize_t *frow = <Py_ssize_t *> malloc(C * s * sizeof(Py_ssize_t))
    cdef Py_ssize_t *grow = <Py_ssize_t *> malloc(T * s * sizeof(Py_ssize_t))
    if phi == NULL or gprod == NULL or frow == NULL or grow == NULL:
        free(phi); free(gprod); free(frow); free(grow)
        raise MemoryError()
    try:
        with nogil:
            for it in range(ntot):
                rem = it
                for l in range(s - 1, -1, -1):
                    th[l] = <int>(rem % nt)
                    rem = rem // nt
                for l in range(s):
                    urow[l] = (l * nt + th[l]) * ntau
                for c in range(C):
                    for l in range(s):
                        frow[c * s + l] = ((c * s + l) * nt + th[l]) * ntau
                for t in range(T):
                    for l in range(s):
                        grow[t * s + l] = ((t * s + l) * nt + th[l]) * ntau
                for d in range(D):
                    usum = 0.0
                    for l in range(s):
                        ii[l] = index[d, l]
                        uu[l] = up[urow[l] + ii[l]]
                        usum = usum + uu[l]
                    cut = 1.0
                    if exclude > 0:
                        if usum <= exclude:
                            continue
                        if usum < 4.0 * exclude:
                            x = sqrt(usum / exclude) - 1.0
                            cut = 1.0 / (1.0 + exp(1.0 / x - 1.0 / (1.0 - x)))
                    if s == 1:
                        b = 1.0
                    else:
                        b = 0.0
                        for j in range(s):
                            pre = 1.0
                            for m in range(s):
                                if m != j:
                                    pre = pre * uu[m]
                            b = b + pre
                    if b <= 0:
                        continue
                    inv = 1.0 / b
                    pw[0] = weight[d] * cut
                    for k in range(1, kmax + 1):
                        pw[k] = pw[k - 1] * inv
                    for g in range(ngroups):
                        phi[g] = 0
                    for c in range(C):
                        p = fp[frow[c * s] + ii[0]]
                        for l in range(1, s):
                            p = p * fp[frow[c * s + l] + ii[l]]
                        phi[fgroup[c]] = phi[fgroup[c]] + p
                    for t in range(T):
                        p = gp[grow[t * s] + ii[0]]
                        for l in range(1, s):
                            p = p * gp[grow[t * s + l] + ii[l]]
                        gprod[t] = pw[kpow[t]] * p
                    if mode == 0:
                        for q in range(P):
                            acc[q] = acc[q] + gprod[pair_t[q]] * phi[pair_g[q]]
                    else:
                        v = 0
                        for q in range(P):
                            v = v + gprod[pair_t[q]] * phi[pair_g[q]]
                        total = total + cabs(v)
    finally:
        free(phi)
        free(gprod)
        free(frow)
        free(grow)
    if mode == 0:
        return out
    return total
