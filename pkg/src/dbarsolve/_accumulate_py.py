"""Pure numpy implementation of the product-quadrature accumulation kernel.

See :mod:`dbarsolve.accumulate` for the argument layout.  The loop runs over
angle tuples of the first ``s - 1`` factors and vectorizes over the angles of
the last factor and over the simplex nodes.
"""
from __future__ import annotations

import itertools

import numpy as np


def _weight_b(u):
    s = len(u)
    if s == 1:
        return np.ones_like(u[-1])
    total = 0
    for j in range(s):
        p = 1
        for m in range(s):
            if m != j:
                p = p * u[m]
        total = total + p
    return total


def accumulate(F, fgroup, G, kpow, U, index, weight, ngroups, pair_t, pair_g, mode=0, exclude=0.0):
    C, s, nt, _ = F.shape
    T = G.shape[0]
    P = len(pair_t)
    last = s - 1
    il = index[:, last]
    f_last = F[:, last][:, :, il]
    g_last = G[:, last][:, :, il]
    u_last = U[last][:, il]
    cols = [index[:, l] for l in range(s - 1)]
    out = np.zeros(P, dtype=complex)
    total = 0.0
    kmax = int(kpow.max()) if T else 0
    for outer in itertools.product(range(nt), repeat=s - 1):
        u = [U[l, outer[l], cols[l]] for l in range(s - 1)] + [u_last]
        b = _weight_b(u) * np.ones_like(u_last)
        keep = b > 0
        cut = np.ones_like(b)
        if exclude > 0:
            usum = sum(u) * np.ones_like(b)
            keep &= usum > exclude
            edge = keep & (usum < 4 * exclude)
            x = np.sqrt(usum[edge] / exclude) - 1.0
            with np.errstate(over="ignore"):
                cut[edge] = 1.0 / (1.0 + np.exp(1.0 / x - 1.0 / (1.0 - x)))
        inv = np.zeros_like(b)
        inv[keep] = 1.0 / b[keep]
        powers = [keep * cut * weight[None, :]]
        for _ in range(kmax):
            powers.append(powers[-1] * inv)
        phi = np.zeros((ngroups,) + b.shape, dtype=complex)
        for c in range(C):
            p = f_last[c]
            for l in range(s - 1):
                p = p * F[c, l, outer[l], cols[l]]
            phi[fgroup[c]] += p
        gprod = []
        for t in range(T):
            p = g_last[t] * powers[kpow[t]]
            for l in range(s - 1):
                p = p * G[t, l, outer[l], cols[l]]
            gprod.append(p)
        if mode == 0:
            for q in range(P):
                out[q] += np.sum(gprod[pair_t[q]] * phi[pair_g[q]])
        else:
            val = np.zeros(b.shape, dtype=complex)
            for q in range(P):
                val += gprod[pair_t[q]] * phi[pair_g[q]]
            total += float(np.sum(np.abs(val)))
    return out if mode == 0 else total
