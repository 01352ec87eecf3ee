"""Selection of the product-quadrature accumulation kernel.

For every angle tuple ``(theta_1, ..., theta_s)`` and every node ``d`` of an
ordered-simplex table the kernel forms

    phi_g   = sum_{c : fgroup[c] = g} prod_l F[c, l, theta_l, index[d, l]]
    gprod_t = weight[d] * prod_l G[t, l, theta_l, index[d, l]] / B^kpow[t]

with ``B = sum_j prod_{m != j} U[m, theta_m, index[d, m]]``, and accumulates
``gprod_{pair_t[q]} * phi_{pair_g[q]}`` for every pair ``q``.  Mode 0 returns the
per-pair sums; mode 1 returns the sum over nodes of ``|sum_q ...|`` (an L1
norm).  With ``exclude = delta^2 > 0`` nodes with ``sum_l U <= delta^2`` are
skipped and nodes with ``delta^2 < sum_l U < 4 delta^2`` are damped by a smooth
ramp, so the excluded neighborhood of ``z = w`` has a soft edge.  Summation order is fixed,
so results are reproducible bit for bit on a given build.

The compiled extension is used when it imports; setting ``DBAR_PURE_PYTHON=1``
forces the numpy fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _accumulate_py

BACKEND = "python"
_compiled = None
if os.environ.get("DBAR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _accumulate as _compiled

        BACKEND = "cython"
    except ImportError:
        _compiled = None


def accumulate(F, fgroup, G, kpow, U, index, weight, ngroups, pair_t, pair_g, mode=0,
               exclude=0.0, backend: str | None = None):
    backend = BACKEND if backend is None else backend
    args = (
        np.ascontiguousarray(F, dtype=np.complex128),
        np.ascontiguousarray(fgroup, dtype=np.int64),
        np.ascontiguousarray(G, dtype=np.complex128),
        np.ascontiguousarray(kpow, dtype=np.int64),
        np.ascontiguousarray(U, dtype=np.float64),
        np.ascontiguousarray(index, dtype=np.int64),
        np.ascontiguousarray(weight, dtype=np.float64),
        int(ngroups),
        np.ascontiguousarray(pair_t, dtype=np.int64),
        np.ascontiguousarray(pair_g, dtype=np.int64),
    )
    if backend == "cython":
        if _compiled is None:
            raise ImportError("compiled accumulation kernel is not built")
        return _compiled.accumulate(*args, mode=int(mode), exclude=float(exclude))
    if backend != "python":
        raise ValueError(f"unknown backend {backend!r}")
    return _accumulate_py.accumulate(*args, mode=mode, exclude=exclude)
