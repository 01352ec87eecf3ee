"""Canonical solution operators on product domains.

``solve_T`` applies the alternating sum of nested one-variable operators to
z-bar derivatives of a polynomial form.  ``solve_K`` integrates the form itself
against the symbolic derivatives of the partition kernels ``e``; it accepts
sampled data and never differentiates ``f``.  For ``s`` selected factors the
integral over ``D_{i_1} x ... x D_{i_s}`` is taken in polar coordinates about
the target in every factor, with the scaled radii mapped through the
ordered-simplex substitution of :func:`dbarsolve.quadrature.duffy_table`.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve

from . import kernel_calculus
from .accumulate import accumulate
from .errors import ConfigError, DomainError, UnsupportedError
from .forms import PolyForm, SampledForm
from .domain_geometry import as_product
from .planar_kernels import KernelContext, SolutionField, check_resolution, orientation_sign, solve_planar_T
from .quadrature import angle_grading, duffy_table, graded_angles, trapezoid_angles


@dataclass(frozen=True)
class Resolution:
    """Angular and radial node counts per number of selected factors ``s``.

    ``nt[s]`` angles per factor and ``nr[s]`` Gauss nodes per simplex
    coordinate; the rule for ``s`` factors has ``s! nr^s nt^s`` nodes.
    """

    nt: dict = field(default_factory=lambda: {1: 128, 2: 48, 3: 16, 4: 8})
    nr: dict = field(default_factory=lambda: {1: 64, 2: 20, 3: 8, 4: 4})

    @classmethod
    def uniform(cls, nt: int, nr: int, n: int = 4) -> "Resolution":
        return cls({s: nt for s in range(1, n + 1)}, {s: nr for s in range(1, n + 1)})

    def at(self, s: int):
        try:
            return int(self.nt[s]), int(self.nr[s])
        except KeyError as exc:
            raise ConfigError(f"no resolution configured for {s} factors") from exc


DEFAULT_RESOLUTION = Resolution()


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("DBAR_WORKERS", "1")))
    except ValueError as exc:
        raise ConfigError("DBAR_WORKERS must be an integer") from exc


@lru_cache(maxsize=None)
def _lowered(idx: kernel_calculus.IndexSet, derivative: bool):
    expr = kernel_calculus.e_kernel_derivative(idx) if derivative else kernel_calculus.e_kernel_expr(idx)
    return tuple(kernel_calculus.lower(expr, idx.indices))


class ProductOperator:
    """Kernel contexts and quadrature settings for one product domain.

    Parameters
    ----------
    domain : ProductDomain or PlanarDomain
    resolution : Resolution
    n_boundary : int
        Nystrom node count for Jordan factors.
    max_n : int
        Cap on the number of factors.
    """

    def __init__(self, domain, resolution: Resolution = DEFAULT_RESOLUTION, n_boundary: int = 256,
                 max_n: int = 4, grading: float = 4.0, grade: int = 2):
        self.grading = grading
        self.grade = grade
        self.domain = as_product(domain)
        if self.domain.n > max_n:
            raise UnsupportedError(f"{self.domain.n} factors exceed the configured cap {max_n}")
        self.resolution = resolution
        self.n_boundary = n_boundary
        self.max_n = max_n
        self.ctxs = [KernelContext(d, n_boundary) for d in self.domain.factors]
        self.sigma = orientation_sign()
        self._planar = {}

    @property
    def n(self) -> int:
        return self.domain.n

    # -- per-target factor grids -------------------------------------------------
    def _factor_grid(self, l: int, w: complex, s: int):
        """Generator values on the polar grid of factor ``l`` (0-based) about ``w``."""
        nt, nr = self.resolution.at(s)
        tab = duffy_table(s, nr, self.grade)
        dom = self.domain.factors[l]
        th, dth = graded_angles(nt, *angle_grading(dom, w, self.grading))
        rad = dom.ray_length(w, th)
        z = w + np.outer(rad * np.exp(1j * th), tab.tau)
        d = w - z
        ctx = self.ctxs[l]
        return {
            "jac": np.outer(rad**2 * dth, tab.tau),
            "S": ctx.S(w, z),
            "dS": ctx.dS(w, z),
            "d": d,
            "dc": np.conj(d),
            "u": np.outer(rad**2, tab.tau**2),
            "z": z,
        }

    def _check_target(self, w):
        if len(w) != self.n:
            raise DomainError(f"target has {len(w)} coordinates, domain has {self.n}")
        for dom, x in zip(self.domain.factors, w):
            if dom.contains(x) != "interior":
                raise DomainError(f"target coordinate {x} is not interior")
        smax = self.n
        nt, _ = self.resolution.at(smax)
        for dom, x in zip(self.domain.factors, w):
            check_resolution(dom, x, nt)

    # -- core integral -----------------------------------------------------------
    def integrate_many(self, w, indices, channel_sets, derivative: bool = True, mode: int = 0,
                       exclude: float = 0.0):
        """``sum_j int F_j * kernel_j`` over the factors in ``indices`` for several data sets.

        ``channel_sets[i][j]`` lists ``(coef, [g_l or None per selected factor])``
        for data set ``i`` and distinguished position ``j``.  No measure constant
        is applied.  Returns one complex value per set (mode 0) or the L1
        integral of the integrand summed over all sets (mode 1).
        """
        indices = tuple(indices)
        s = len(indices)
        nt, nr = self.resolution.at(s)
        tab = duffy_table(s, nr, self.grade)
        ntau = tab.tau.size
        grids = [self._factor_grid(m - 1, w[m - 1], s) for m in indices]
        Fs, fgroup, groups = [], [], []
        for i, chans_by_j in enumerate(channel_sets):
            for j in sorted(chans_by_j):
                chans = chans_by_j[j]
                if not chans:
                    continue
                gid = len(groups)
                groups.append((i, j))
                for coef, gs in chans:
                    arr = np.empty((s, nt, ntau), dtype=complex)
                    for l in range(s):
                        g = gs[l]
                        arr[l] = 1.0 if g is None else g(grids[l]["z"])
                    arr[0] *= coef
                    Fs.append(arr)
                    fgroup.append(gid)
        if not groups:
            return np.zeros(len(channel_sets), dtype=complex) if mode == 0 else 0.0
        Gs, kpow, term_ids = [], [], {}
        for j in sorted({j for _, j in groups}):
            ids = []
            for coef, exps, k in _lowered(kernel_calculus.IndexSet(indices, j), derivative):
                arr = np.empty((s, nt, ntau), dtype=complex)
                for l, m in enumerate(indices):
                    arr[l] = _generator_product(grids[l], exps[m])
                arr[0] *= coef
                ids.append(len(Gs))
                Gs.append(arr)
                kpow.append(k)
            term_ids[j] = ids
        pair_t, pair_g, pair_set = [], [], []
        for gid, (i, j) in enumerate(groups):
            for t in term_ids[j]:
                pair_t.append(t)
                pair_g.append(gid)
                pair_set.append(i)
        res = accumulate(np.array(Fs), fgroup, np.array(Gs), kpow, np.array([g["u"] for g in grids]),
                         tab.index, tab.weight, len(groups), pair_t, pair_g, mode, exclude)
        if mode != 0:
            return float(res)
        out = np.zeros(len(channel_sets), dtype=complex)
        np.add.at(out, np.array(pair_set), res)
        return out

    def integrate(self, w, indices, channels_by_j, derivative: bool = True, mode: int = 0,
                  exclude: float = 0.0):
        res = self.integrate_many(w, indices, [channels_by_j], derivative, mode, exclude)
        return complex(res[0]) if mode == 0 else res

    def _channels(self, f, w, indices, j, poly=None):
        """Separable terms of ``f_{i_j}`` with non-selected coordinates frozen at ``w``."""
        comp = indices[j - 1]
        terms = f.separable_terms(comp) if poly is None else f.separable_terms(comp, poly)
        out = []
        for coef, gs in terms:
            c = complex(coef)
            for l in range(self.n):
                if (l + 1) not in indices and gs[l] is not None:
                    c *= complex(np.asarray(gs[l](np.asarray(w[l], dtype=complex))))
            if c != 0:
                out.append((c, [gs[m - 1] for m in indices]))
        return out

    # -- operators ---------------------------------------------------------------
    def K_many(self, forms, w) -> np.ndarray:
        """``K f(w)`` for several forms sharing one quadrature pass."""
        w = tuple(complex(x) for x in w)
        self._check_target(w)
        total = np.zeros(len(forms), dtype=complex)
        for indices in kernel_calculus.index_sets(self.n, self.max_n):
            s = len(indices)
            sets = [{j: self._channels(f, w, indices, j) for j in range(1, s + 1)} for f in forms]
            total += (2j * self.sigma) ** s * self.integrate_many(w, indices, sets)
        return total

    def K_at(self, f, w) -> complex:
        return complex(self.K_many([f], w)[0])

    def planar_T(self, l: int, a: int, b: int, w: complex) -> complex:
        """One-variable canonical solution of ``z^a zbar^b`` in factor ``l`` (0-based), cached."""
        nt, nr = self.resolution.at(1)
        key = (l, a, b, complex(w))
        if key not in self._planar:
            fun = lambda z: np.asarray(z, dtype=complex) ** a * np.conj(z) ** b
            self._planar[key] = complex(
                solve_planar_T(self.ctxs[l], fun, [w], nr=nr, nt=nt).values[0]
            )
        return self._planar[key]

    def T_at(self, f: PolyForm, w) -> complex:
        w = tuple(complex(x) for x in w)
        self._check_target(w)
        total = 0j
        for indices in kernel_calculus.index_sets(self.n, self.max_n):
            s = len(indices)
            g = f.derivative(indices[-1], indices[:-1])
            acc = 0j
            for (a, b), c in g.items():
                term = complex(c)
                for l in range(self.n):
                    if (l + 1) in indices:
                        term *= self.planar_T(l, a[l], b[l], w[l])
                    else:
                        term *= w[l] ** a[l] * np.conj(w[l]) ** b[l]
                acc += term
            total += (-1) ** (s - 1) * acc
        return total


def _generator_product(grid, exps):
    pS, pdS, pd, pdc, pu = exps
    out = grid["jac"].astype(complex)
    if pS:
        out = out * grid["S"] ** pS
    if pdS:
        out = out * grid["dS"] ** pdS
    if pd:
        out = out * grid["d"] ** pd
    if pdc:
        out = out * grid["dc"] ** pdc
    if pu:
        out = out * grid["u"] ** pu
    return out


# -- public API ------------------------------------------------------------------

def _targets_array(targets, n):
    t = np.asarray(targets, dtype=complex)
    if t.ndim == 1 and n == 1:
        t = t[:, None]
    if t.ndim != 2 or t.shape[1] != n:
        raise DomainError(f"targets must have shape (m, {n})")
    return t


def _run(op_args, forms, rows):
    op = ProductOperator(*op_args)
    return [op.K_many(forms, w) for w in rows]


def _evaluate_K(op: ProductOperator, forms, targets) -> np.ndarray:
    """Values of ``K f`` with shape ``(len(forms), len(targets))``."""
    workers = worker_count()
    rows = [tuple(r) for r in targets]
    out = np.empty((len(rows), len(forms)), dtype=complex)
    if workers == 1 or len(rows) < 2 * workers:
        for i, w in enumerate(rows):
            out[i] = op.K_many(forms, w)
        return out.T
    chunks = [rows[i::workers] for i in range(workers)]
    args = (op.domain, op.resolution, op.n_boundary, op.max_n, op.grading, op.grade)
    with ProcessPoolExecutor(workers) as ex:
        parts = list(ex.map(_run, [args] * workers, [forms] * workers, chunks))
    for i, part in enumerate(parts):
        out[i::workers] = np.array(part).reshape(-1, len(forms))
    return out.T


def solve_K_many(domain, forms, targets, resolution: Resolution = DEFAULT_RESOLUTION,
                 operator: ProductOperator | None = None) -> list:
    """``K f`` for several forms at the same targets (one quadrature pass per target)."""
    op = operator or ProductOperator(domain, resolution)
    for f in forms:
        if f.n != op.n:
            raise DomainError(f"form has {f.n} components, domain has {op.n} factors")
    t = _targets_array(targets, op.n)
    vals = _evaluate_K(op, list(forms), t)
    meta = {"operator": "K", "n": op.n, "resolution": _res_meta(op.resolution, op.n)}
    return [SolutionField(t, v, dict(meta)) for v in vals]


def solve_K(domain, f, targets, resolution: Resolution = DEFAULT_RESOLUTION,
            operator: ProductOperator | None = None) -> SolutionField:
    """Derivative-free canonical solution ``u = K f`` at the targets."""
    return solve_K_many(domain, [f], targets, resolution, operator)[0]


def solve_T(domain, f, targets, resolution: Resolution = DEFAULT_RESOLUTION,
            operator: ProductOperator | None = None) -> SolutionField:
    """Canonical solution by nested one-variable operators; polynomial forms only."""
    if not isinstance(f, PolyForm):
        raise UnsupportedError("operator T needs a polynomial form (derivatives of f are taken)")
    op = operator or ProductOperator(domain, resolution)
    if f.n != op.n:
        raise DomainError(f"form has {f.n} components, domain has {op.n} factors")
    t = _targets_array(targets, op.n)
    vals = np.array([op.T_at(f, w) for w in t], dtype=complex)
    return SolutionField(t, vals, {"operator": "T", "n": op.n, "resolution": _res_meta(op.resolution, 1)})


def _res_meta(res, n):
    return {s: res.at(s) for s in range(1, n + 1)}


@dataclass
class IbpResult:
    lhs: complex
    rhs: complex
    sign: int
    residual: float


def ibp_check(domain, f: PolyForm, idx: kernel_calculus.IndexSet, w=None, tol: float = 1e-5,
              resolution: Resolution = DEFAULT_RESOLUTION, seed: int = 0,
              operator: ProductOperator | None = None) -> IbpResult:
    """Compare ``int e_j d^{s-1} f_{i_j}`` with ``int f_{i_j} d^{s-1} e_j`` at one target.

    Both integrals use the plain area measure over the selected factors; the
    sign relating them is measured, not assumed.
    """
    if not isinstance(f, PolyForm):
        raise UnsupportedError("the integration-by-parts check needs a polynomial form")
    op = operator or ProductOperator(domain, resolution)
    if w is None:
        rng = np.random.default_rng(seed)
        w = tuple(0.4 * np.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random()) for _ in range(op.n))
    w = tuple(complex(x) for x in w)
    indices = idx.indices
    comp = idx.distinguished
    deriv = f.derivative(comp, idx.others)
    lhs = op.integrate(w, indices, {idx.j: op._channels(f, w, indices, idx.j, poly=deriv)},
                       derivative=False)
    rhs = op.integrate(w, indices, {idx.j: op._channels(f, w, indices, idx.j)}, derivative=True)
    sign = 1 if abs(lhs - rhs) <= abs(lhs + rhs) else -1
    resid = abs(lhs - sign * rhs)
    return IbpResult(lhs, rhs, sign, resid)


# -- mollification ------------------------------------------------------------------

@dataclass(frozen=True)
class MollifierSpec:
    """Inward scaling by ``1 - eps`` about each factor's center, then convolution
    with a product of radial bumps of radius ``eps * r_min / 2`` per factor
    (``r_min`` the smallest center-to-boundary distance)."""

    eps: float
    centers: tuple | None = None

    def __post_init__(self):
        if not self.eps > 0 or self.eps >= 1:
            raise ConfigError("mollifier eps must lie in (0, 1)")


def bump_kernel(radius: float, hx: float, hy: float) -> np.ndarray:
    """Discrete unit-mass bump ``exp(-1 / (1 - |x/r|^2))`` on a grid of spacing ``(hx, hy)``."""
    kx = int(np.floor(radius / hx))
    ky = int(np.floor(radius / hy))
    x = np.arange(-kx, kx + 1) * hx
    y = np.arange(-ky, ky + 1) * hy
    q = (x[:, None] ** 2 + y[None, :] ** 2) / radius**2
    ker = np.where(q < 1, np.exp(-1.0 / np.maximum(1 - q, 1e-300)), 0.0)
    if ker.sum() == 0:
        ker = np.ones((1, 1))
    return ker / ker.sum()


def mollify(domain, f: SampledForm, spec: MollifierSpec) -> SampledForm:
    """Smooth a sampled form by inward scaling followed by convolution."""
    if not isinstance(f, SampledForm):
        raise UnsupportedError("mollify needs a sampled form")
    dom = as_product(domain)
    if dom.n != f.n:
        raise DomainError("form and domain dimensions differ")
    centers = spec.centers or tuple(d.center for d in dom.factors)
    kernels = []
    for d, c, g in zip(dom.factors, centers, f.grids):
        if not d.is_star_shaped_about(c):
            raise UnsupportedError(f"factor is not star-shaped about {c}")
        rmin = float(np.min(d.ray_length(c, trapezoid_angles(512))))
        kernels.append((complex(c), bump_kernel(0.5 * spec.eps * rmin, g.hx, g.hy)))

    def smooth(l, a):
        g = f.grids[l]
        c, ker = kernels[l]
        pts = c + (1 - spec.eps) * (g.points() - c)
        pulled = g.interpolate(a, pts, f.order)
        return fftconvolve(pulled, ker, mode="same")

    return f.map_terms(smooth)
