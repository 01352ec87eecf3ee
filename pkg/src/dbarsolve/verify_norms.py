"""Checks that characterize a computed solution and scans of the operators.

* :func:`residual_dbar` differentiates a solution numerically and compares
  with the data.
* :func:`bergman_orthogonality` tests orthogonality against holomorphic
  polynomials with a product quadrature rule.
* :func:`boundary_vanishing_scan`, :func:`l1_kernel_scan` and
  :func:`norm_scan` probe the kernels and the solution operators.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernel_calculus
from .accumulate import accumulate
from .errors import ConfigError, NearBoundaryError, UnsupportedError
from .forms import PolyForm, SampledForm
from .domain_geometry import PlanarDomain, as_product
from .planar_kernels import KernelContext, SolutionField
from .product_operator import MollifierSpec, ProductOperator, Resolution, mollify, solve_K_many, solve_T
from .quadrature import disc_rule, duffy_table, gauss01

BASELINE_PATH = Path(__file__).with_name("data") / "norm_baseline.json"


# -- product quadrature rules ---------------------------------------------------

@dataclass(frozen=True)
class ProductRule:
    """Tensor rule on a product domain: ``nodes`` is ``(M, n)``, ``weights`` is ``(M,)``.

    ``shape`` lists the per-factor ``(nr, nt)`` sizes; nodes are ordered with
    the first factor varying slowest.
    """

    nodes: np.ndarray
    weights: np.ndarray
    shape: tuple

    @property
    def size(self) -> int:
        return len(self.weights)


def _planar_rule(domain: PlanarDomain, nr: int, nt: int):
    if domain.is_disc:
        r, wr = gauss01(nr)
        th = 2 * np.pi * (np.arange(nt) + 0.5) / nt
        nodes = np.outer(r, np.exp(1j * th)).ravel()
        weights = np.outer(r * wr, np.full(nt, 2 * np.pi / nt)).ravel()
        return nodes, weights
    rule = disc_rule(nr, nt, domain)
    return rule.nodes, rule.weights


def _disc_square_rule(m: int, nt: int):
    """Gauss nodes in ``t = r^2`` times offset trapezoidal angles on the unit disc."""
    t, wt = gauss01(m)
    th = 2 * np.pi * (np.arange(nt) + 0.5) / nt
    nodes = np.outer(np.sqrt(t), np.exp(1j * th)).ravel()
    weights = np.outer(0.5 * wt, np.full(nt, 2 * np.pi / nt)).ravel()
    return nodes, weights


def _tensor(dom, parts, shape) -> ProductRule:
    nodes = np.array(list(itertools.product(*[p[0] for p in parts])), dtype=complex)
    weights = np.ones(len(nodes))
    for l, wl in enumerate(itertools.product(*[p[1] for p in parts])):
        weights[l] = np.prod(wl)
    return ProductRule(nodes.reshape(len(nodes), dom.n), weights, shape)


def product_rule(domain, nr: int, nt: int) -> ProductRule:
    """Gauss radii times offset trapezoidal angles in every factor."""
    dom = as_product(domain)
    return _tensor(dom, [_planar_rule(d, nr, nt) for d in dom.factors], ((nr, nt),) * dom.n)


def orthogonality_rule(domain, u_degree: int, max_degree: int) -> ProductRule:
    """Small rule integrating ``u * conj(w^alpha)`` and ``|w^alpha|^2`` exactly.

    Exact on polydiscs whenever ``u`` is a polynomial in ``w, wbar`` with
    degree at most ``u_degree`` in each factor and ``|alpha| <= max_degree``.
    With ``nt = u_degree + max_degree + 1`` angles every nonzero angular
    frequency integrates to zero, and what remains is a polynomial in
    ``t = r^2`` of degree at most ``max(u_degree + max_degree, 2 max_degree) / 2``,
    integrated by Gauss nodes in ``t``.  ``||u||`` (used only to normalize)
    is exact when ``u_degree <= max_degree``.  Other factors get the polar
    rule with ``ceil((top + 2) / 2)`` radii, which is not exact.
    """
    dom = as_product(domain)
    top = u_degree + max_degree
    if all(d.is_disc for d in dom.factors):
        m = max(top, 2 * max_degree) // 4 + 1
        return _tensor(dom, [_disc_square_rule(m, top + 1)] * dom.n, ((m, top + 1),) * dom.n)
    return product_rule(dom, math.ceil((top + 2) / 2), top + 1)


# -- residual of the dbar equation ---------------------------------------------------

_STEPS = (-2, -1, 1, 2)
_FD_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0


def stencil_targets(centers, h: float) -> np.ndarray:
    """Targets for fourth-order centered differences about each center.

    Each center contributes ``1 + 8 n`` rows: the center, then for every
    coordinate the offsets ``-2h, -h, h, 2h`` along the real and then the
    imaginary axis.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=complex))
    n = centers.shape[1]
    rows = []
    for c in centers:
        rows.append(c.copy())
        for k in range(n):
            for unit in (1.0, 1j):
                for step in _STEPS:
                    p = c.copy()
                    p[k] += step * h * unit
                    rows.append(p)
    return np.array(rows)


def _stencil_layout(targets):
    m, n = targets.shape
    block = 1 + 8 * n
    if m == 0 or m % block:
        raise ValueError("solution is not sampled on a centered-difference stencil")
    centers = targets[::block]
    h = float(abs(targets[2, 0] - targets[0, 0]))
    if not h > 0 or not np.allclose(stencil_targets(centers, h), targets, rtol=0, atol=1e-12):
        raise ValueError("solution is not sampled on a centered-difference stencil")
    return centers, h


def residual_dbar(domain, u: SolutionField, f, margin: float = 0.0) -> np.ndarray:
    """Per-component max of ``|du/dwbar_j - f_j|`` at the stencil centers.

    ``u`` must be sampled at :func:`stencil_targets`.  Raises
    :class:`NearBoundaryError` when a stencil reaches within ``margin`` of the
    boundary.
    """
    dom = as_product(domain)
    centers, h = _stencil_layout(u.targets)
    n = dom.n
    for c in centers:
        for d, x in zip(dom.factors, c):
            if d.contains(x) != "interior" or d.dist_to_boundary(x) <= 2 * h + margin:
                raise NearBoundaryError(
                    f"difference step {h:g} is too coarse for center {x}: stencil leaves the interior margin"
                )
    vals = u.values.reshape(len(centers), 1 + 8 * n)
    out = np.zeros(n)
    for k in range(n):
        base = 1 + 8 * k
        dx = vals[:, base:base + 4] @ _FD_WEIGHTS / h
        dy = vals[:, base + 4:base + 8] @ _FD_WEIGHTS / h
        dwbar = 0.5 * (dx + 1j * dy)
        fk = f.component_values(k + 1, [centers[:, l] for l in range(n)])
        out[k] = float(np.max(np.abs(dwbar - fk)))
    return out


# -- Bergman orthogonality -------------------------------------------------------

def multi_degrees(n: int, max_degree: int):
    """Every multi-index ``alpha`` with ``|alpha| <= max_degree``, graded order."""
    out = []
    for total in range(max_degree + 1):
        for a in itertools.product(range(total + 1), repeat=n):
            if sum(a) == total:
                out.append(a)
    return out


def bergman_orthogonality(domain, u: SolutionField, max_degree: int, rule: ProductRule | None = None,
                          basis: str = "auto") -> float:
    """Max normalized inner product of ``u`` with holomorphic polynomials.

    ``u`` must be sampled at the nodes of ``rule``.  With ``basis="monomial"``
    the test functions are ``w^alpha``; ``"orthonormal"`` replaces them by a
    Gram-Schmidt basis of their span under the rule (the default for
    non-disc factors, where monomials are far from orthogonal).
    """
    if rule is None:
        raise ValueError("bergman_orthogonality needs the quadrature rule the solution was sampled on")
    if u.targets.shape != rule.nodes.shape or not np.allclose(u.targets, rule.nodes, rtol=0, atol=1e-12):
        raise ValueError("solution targets do not match the quadrature nodes")
    dom = as_product(domain)
    if basis == "auto":
        basis = "monomial" if all(d.is_disc for d in dom.factors) else "orthonormal"
    w = rule.weights
    uval = u.values
    unorm = math.sqrt(float(np.sum(w * np.abs(uval) ** 2)))
    if unorm == 0:
        return 0.0
    mons = np.stack([np.prod(rule.nodes ** np.array(a), axis=1) for a in multi_degrees(dom.n, max_degree)], 1)
    if basis == "monomial":
        ip = (w * uval) @ np.conj(mons)
        mnorm = np.sqrt(w @ np.abs(mons) ** 2)
        return float(np.max(np.abs(ip) / (unorm * mnorm)))
    if basis != "orthonormal":
        raise ValueError(f"unknown basis {basis!r}")
    sw = np.sqrt(w)
    q, _ = np.linalg.qr(sw[:, None] * mons)
    ip = (sw * uval) @ np.conj(q)
    return float(np.max(np.abs(ip)) / unorm)


# -- boundary vanishing of S ------------------------------------------------------------

def boundary_slopes(ctx: KernelContext, w: complex, n_rays: int = 8, dists=None) -> np.ndarray:
    """Log-log slope of ``|S(w, z)|`` against ``dist(z)`` along inward normals.

    The rays start at ``n_rays`` equispaced boundary parameters and move along
    the inward normal, so the distance to the boundary equals the step for
    steps below the smallest radius of curvature.
    """
    dists = np.geomspace(1e-2, 1e-5, 7) if dists is None else np.asarray(dists, dtype=float)
    t = 2 * np.pi * (np.arange(n_rays) + 0.25) / n_rays
    p, _, normal = ctx.domain.boundary_eval(t)
    slopes = np.empty(n_rays)
    for k in range(n_rays):
        z = p[k] - dists * normal[k]
        vals = np.abs(ctx.S(w, z))
        slopes[k] = np.polyfit(np.log(dists), np.log(vals), 1)[0]
    return slopes


def boundary_vanishing_scan(ctx: KernelContext, w: complex, n_rays: int = 8, dists=None) -> float:
    """Mean decay slope of ``S(w, .)`` toward the boundary over ``n_rays`` rays."""
    return float(np.mean(boundary_slopes(ctx, w, n_rays, dists)))


# -- L1 scans of the product kernels ----------------------------------------------------

@dataclass
class L1Scan:
    """L1 norms of one kernel: ``values[i, k]`` at sample ``w_i`` and refinement ``k``."""

    idx: kernel_calculus.IndexSet
    samples: list
    resolutions: list
    values: np.ndarray
    extrapolated: np.ndarray
    bounded: bool
    spread: float

    def rows(self):
        for i, w in enumerate(self.samples):
            for k, res in enumerate(self.resolutions):
                yield i, res, float(self.values[i, k])


def _extrapolate(seq):
    """Aitken extrapolation of the last three entries (plain last value if unstable)."""
    if len(seq) < 3:
        return float(seq[-1])
    a, b, c = seq[-3:]
    den = (c - b) - (b - a)
    if den == 0 or abs(c - b) >= abs(b - a):
        return float(c)
    return float(c - (c - b) ** 2 / den)


def _scan_resolution(nt, nr, s):
    res = Resolution.uniform(nt, nr, max(s, 1))
    return res


def l1_kernel_scan(domain, idx: kernel_calculus.IndexSet, w_samples, resolutions=((32, 8), (64, 16), (128, 32)),
                   derivative: bool = True, exclusion: float = 2.0, trivial: bool = False) -> L1Scan:
    """``int |d^{s-1} e^{idx}_{i_j}(w, z)| dV(z)`` on refining product rules.

    Parameters
    ----------
    resolutions : sequence of (nt, nr)
        Angular and radial sizes per factor, in refining order.
    exclusion : float
        Nodes closer to ``z = w`` than ``exclusion`` node spacings are
        dropped; the spacing is ``diameter / nt`` and so halves when
        ``nt`` doubles.
    trivial : bool
        Integrate the constant 1 instead of the kernel (gives ``prod area``).
    """
    dom = as_product(domain)
    samples = [tuple(complex(x) for x in (w if np.ndim(w) else [w])) for w in w_samples]
    s = idx.s
    indices = idx.indices
    diam = max(dom.factors[m - 1].diameter for m in indices)
    vals = np.zeros((len(samples), len(resolutions)))
    for k, (nt, nr) in enumerate(resolutions):
        op = ProductOperator(dom, _scan_resolution(nt, nr, dom.n))
        delta = exclusion * diam / nt if exclusion > 0 else 0.0
        for i, w in enumerate(samples):
            if trivial:
                vals[i, k] = _l1_one(op, w, indices, delta**2)
            else:
                chans = {idx.j: [(1.0, [None] * s)]}
                vals[i, k] = op.integrate(w, indices, chans, derivative=derivative, mode=1,
                                          exclude=delta**2)
    ext = np.array([_extrapolate(row) for row in vals])
    steps = np.abs(np.diff(vals, axis=1))
    bounded = bool(np.all(np.isfinite(vals)) and np.all(ext > 0))
    if steps.shape[1] >= 2:
        tol = 1e-3 * np.abs(vals[:, -1])
        bounded &= bool(np.all(steps[:, -1] <= steps[:, -2] + tol))
    spread = float((ext.max() - ext.min()) / ext.max()) if len(ext) else 0.0
    return L1Scan(idx, samples, [tuple(r) for r in resolutions], vals, ext, bounded, spread)


def _l1_one(op: ProductOperator, w, indices, exclude):
    s = len(indices)
    nt, nr = op.resolution.at(s)
    tab = duffy_table(s, nr, op.grade)
    grids = [op._factor_grid(m - 1, w[m - 1], s) for m in indices]
    ones = np.ones((1, s, nt, tab.tau.size), dtype=complex)
    G = np.array([[g["jac"] for g in grids]], dtype=complex)
    U = np.array([g["u"] for g in grids])
    return float(accumulate(ones, [0], G, [0], U, tab.index, tab.weight, 1, [0], [0], 1, exclude))


# -- empirical Lp operator norms ------------------------------------------------------

FAMILIES = ("polynomials", "mollified-step", "oscillatory")
DEFAULT_P = (1.0, 2.0, 4.0, 8.0, math.inf)
DEFAULT_RESOLUTIONS = (32, 64, 128)
OSC_K = 8.0


def step_form(domain, m: int) -> SampledForm:
    """``sum_l chi(Re(z_l - c_l) > 0) dzbar_l`` sampled on ``m x m`` grids (closed)."""
    dom = as_product(domain)
    comps = []
    for l, d in enumerate(dom.factors):
        c = d.center
        gs = [None] * dom.n
        gs[l] = lambda z, c=c: (np.real(z - c) > 0).astype(complex)
        comps.append([(1.0, gs)])
    return SampledForm.from_functions(dom.factors, m, comps)


def oscillatory_form(domain, m: int, k: float = OSC_K) -> SampledForm:
    """``sum_l exp(i k Re z_l) dzbar_l`` sampled on ``m x m`` grids, cubic interpolation."""
    dom = as_product(domain)
    comps = []
    for l in range(dom.n):
        gs = [None] * dom.n
        gs[l] = lambda z: np.exp(1j * k * np.real(z))
        comps.append([(1.0, gs)])
    return SampledForm.from_functions(dom.factors, m, comps, order=3)


def polynomial_members(n: int):
    """Smooth members: ``dzbar_1`` and the dbar of ``prod zbar_l + z_1 zbar_1^2 / 2``."""
    one = PolyForm.dbar(n, [(1, (0,) * n, (1,) + (0,) * (n - 1))])
    a = (1,) + (0,) * (n - 1)
    b = (2,) + (0,) * (n - 1)
    mixed = PolyForm.dbar(n, [(1, (0,) * n, (1,) * n), (0.5, a, b)])
    return [("dzbar1", one), ("mixed", mixed)]


def step_eps(resolution: int) -> float:
    """Mollifier parameter tied to the data grid: 0.2 at 32 points, halving with each doubling."""
    return 0.2 * 32 / resolution


def family_members(domain, family: str, resolution: int):
    dom = as_product(domain)
    if family == "polynomials":
        return polynomial_members(dom.n)
    if family == "mollified-step":
        f = step_form(dom, resolution)
        return [("step", mollify(dom, f, MollifierSpec(step_eps(resolution))))]
    if family == "oscillatory":
        return [("osc", oscillatory_form(dom, resolution))]
    if family == "zero":
        return [("zero", PolyForm(dom.n, [{}] * dom.n))]
    raise ConfigError(f"unknown data family {family!r}; expected one of {', '.join(FAMILIES)}")


def operator_resolution(resolution: int) -> Resolution:
    """Quadrature sizes of the solution operator at a data resolution ``N`` per factor."""
    N = int(resolution)
    return Resolution(
        {1: 2 * N, 2: N // 2, 3: max(8, N // 8), 4: 8},
        {1: N, 2: N // 4, 3: max(4, N // 16), 4: 4},
    )


def _lp(values, weights, p):
    a = np.abs(values)
    if math.isinf(p):
        return float(a.max()) if a.size else 0.0
    return float(np.sum(weights * a**p) ** (1.0 / p))


def _form_modulus(f, rule_parts):
    """``|f| = sqrt(sum_j |f_j|^2)`` on the tensor grid given by per-factor nodes."""
    n = len(rule_parts)
    z = []
    for l, nodes in enumerate(rule_parts):
        shape = [1] * n
        shape[l] = nodes.size
        z.append(nodes.reshape(shape))
    total = 0.0
    for j in range(1, n + 1):
        total = total + np.abs(f.component_values(j, z)) ** 2
    return np.sqrt(total)


def _spot_nodes(domain, node, nr: int, nt: int):
    """A 2x refined local grid about one node: half the rule spacing in radius and angle.

    The radial step is also capped at half the distance to the boundary.
    """
    per = []
    for d, x in zip(as_product(domain).factors, node):
        c = d.center
        r, th = abs(x - c), np.angle(x - c)
        dr = 0.5 * min(0.5 * d.diameter / nr, d.dist_to_boundary(x))
        dth = np.pi / nt
        pts = []
        for a in (-1, 0, 1):
            for b in (-1, 0, 1):
                z = c + (r + a * dr) * np.exp(1j * (th + b * dth))
                if r + a * dr > 0 and d.contains(z) == "interior":
                    pts.append(z)
        per.append(pts)
    return np.array(list(itertools.product(*per)), dtype=complex)


def _form_lp_norms(dom, f, rule_nr, rule_nt, ps):
    parts = [_planar_rule(d, rule_nr, rule_nt) for d in dom.factors]
    mod = _form_modulus(f, [p[0] for p in parts])
    w = parts[0][1]
    for p in parts[1:]:
        w = np.multiply.outer(w, p[1])
    out = {}
    for p in ps:
        if math.isinf(p):
            flat = int(np.argmax(mod))
            pos = np.unravel_index(flat, mod.shape)
            node = [parts[l][0][pos[l]] for l in range(dom.n)]
            spots = _spot_nodes(dom, node, rule_nr, rule_nt)
            extra = np.sqrt(sum(np.abs(f.component_values(j, [spots[:, l] for l in range(dom.n)])) ** 2
                                for j in range(1, dom.n + 1)))
            out[p] = float(max(mod.max(), extra.max() if extra.size else 0.0))
        else:
            out[p] = float(np.sum(w * mod**p) ** (1.0 / p))
    return out


@dataclass
class NormReport:
    """Empirical ``||u||_p / ||f||_p`` over a ``(p, resolution)`` lattice."""

    operator: str
    family: str
    rows: list = field(default_factory=list)  # (member, p, resolution, fnorm, unorm, ratio)

    @property
    def max_ratio(self) -> float:
        return max((r[5] for r in self.rows), default=0.0)

    def ratio(self, member, p, resolution) -> float:
        for r in self.rows:
            if r[0] == member and r[1] == p and r[2] == resolution:
                return r[5]
        raise KeyError((member, p, resolution))

    @property
    def members(self):
        return sorted({r[0] for r in self.rows})

    @property
    def ps(self):
        return sorted({r[1] for r in self.rows})

    @property
    def resolutions(self):
        return sorted({r[2] for r in self.rows})

    def monotone_in_resolution(self, rtol: float = 0.0) -> dict:
        """``{(member, p): ratio non-increasing as the resolution is refined}``."""
        flags = {}
        for m in self.members:
            for p in self.ps:
                seq = [self.ratio(m, p, N) for N in self.resolutions]
                flags[(m, p)] = all(b <= a * (1 + rtol) for a, b in zip(seq, seq[1:]))
        return flags

    def p_slopes(self) -> dict:
        """Least-squares slope of ``log ratio`` against ``log p`` over finite ``p``."""
        out = {}
        finite = [p for p in self.ps if not math.isinf(p)]
        for m in self.members:
            for N in self.resolutions:
                r = np.array([self.ratio(m, p, N) for p in finite])
                if len(finite) < 2 or np.any(r <= 0):
                    out[(m, N)] = 0.0
                else:
                    out[(m, N)] = float(np.polyfit(np.log(finite), np.log(r), 1)[0])
        return out

    def p_capped(self, rtol: float = 0.0) -> dict:
        """``{(member, N): every finite-p ratio <= the p = inf ratio}``.

        A bounded operator family saturates as ``p`` grows; a ratio above the
        ``p = inf`` endpoint signals growth in ``p``.  Needs ``inf`` in the scan.
        """
        if not any(math.isinf(p) for p in self.ps):
            raise ConfigError("p_capped needs p = inf in the scan")
        out = {}
        for m in self.members:
            for N in self.resolutions:
                cap = self.ratio(m, math.inf, N)
                out[(m, N)] = all(self.ratio(m, p, N) <= cap * (1 + rtol) + 1e-300
                                  for p in self.ps if not math.isinf(p))
        return out

    def complete(self) -> bool:
        return len(self.rows) == len(self.members) * len(self.ps) * len(self.resolutions) and all(
            math.isfinite(r[5]) for r in self.rows
        )

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["operator", "family", "member", "p", "resolution", "norm_f", "norm_u", "ratio"])
        for m, p, N, fn, un, ratio in self.rows:
            wr.writerow([self.operator, self.family, m, "inf" if math.isinf(p) else format(p, "g"), N,
                         format(fn, ".17g"), format(un, ".17g"), format(ratio, ".17g")])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def summary(self) -> str:
        lines = [f"{self.operator} on family {self.family}: max ratio {self.max_ratio:.6g}"]
        lines.append(f"{'member':>8} {'p':>5} {'N':>5} {'|f|_p':>12} {'|u|_p':>12} {'ratio':>10}")
        for m, p, N, fn, un, ratio in self.rows:
            ps = "inf" if math.isinf(p) else f"{p:g}"
            lines.append(f"{m:>8} {ps:>5} {N:>5} {fn:12.6g} {un:12.6g} {ratio:10.6g}")
        return "\n".join(lines)


def norm_scan(domain, operator: str, family: str, p_list=DEFAULT_P, resolutions=DEFAULT_RESOLUTIONS,
              eval_rule: tuple = (3, 6)) -> NormReport:
    """Empirical operator norms ``||Op f||_p / ||f||_p``.

    For each data resolution ``N`` the family is sampled on ``N x N`` grids
    per factor (step data mollified with ``eps`` from :func:`step_eps`), the
    operator runs at :func:`operator_resolution` ``(N)`` and ``||f||_p`` uses a
    product rule with ``N / 4`` radii and ``N / 2`` angles per factor.
    ``||u||_p`` uses the fixed product rule ``eval_rule = (nr, nt)`` so that
    every resolution is compared on the same nodes.  ``p = inf`` is the grid
    maximum plus a 2x refined spot grid about the maximizing node.
    """
    dom = as_product(domain)
    operator = operator.upper()
    if operator not in ("T", "K"):
        raise ConfigError(f"operator must be T or K, got {operator!r}")
    ps = [float(p) for p in p_list]
    report = NormReport(operator, family)
    rule = product_rule(dom, *eval_rule)
    for N in resolutions:
        members = family_members(dom, family, N)
        res = operator_resolution(N)
        forms = [f for _, f in members]
        if operator == "K":
            fields = solve_K_many(dom, forms, rule.nodes, res)
        else:
            if not all(isinstance(f, PolyForm) for f in forms):
                raise UnsupportedError("operator T needs polynomial data")
            fields = [solve_T(dom, f, rule.nodes, res) for f in forms]
        for (name, f), u in zip(members, fields):
            fnorms = _form_lp_norms(dom, f, max(4, N // 4), max(8, N // 2), ps)
            for p in ps:
                if math.isinf(p):
                    unorm = _u_sup(dom, f, u, rule, eval_rule, res, operator)
                else:
                    unorm = _lp(u.values, rule.weights, p)
                fn = fnorms[p]
                report.rows.append((name, p, int(N), fn, unorm, unorm / fn if fn > 0 else 0.0))
    return report


def _u_sup(dom, f, u, rule, eval_rule, res, operator):
    a = np.abs(u.values)
    if not a.size or a.max() == 0:
        return 0.0
    node = rule.nodes[int(np.argmax(a))]
    spots = _spot_nodes(dom, node, *eval_rule)
    if operator == "K":
        extra = solve_K_many(dom, [f], spots, res)[0].values
    else:
        extra = solve_T(dom, f, spots, res).values
    return float(max(a.max(), np.abs(extra).max()))


# -- regression baseline ------------------------------------------------------------

def baseline_key(domain, report: NormReport) -> str:
    dom = as_product(domain)
    kinds = "x".join("disc" if d.is_disc else "jordan" for d in dom.factors)
    return f"{kinds}|{report.operator}|{report.family}"


def check_baseline(domain, report: NormReport, path=None, record: bool = True, rtol: float = 1e-9):
    """Compare ``report.max_ratio`` with the stored constant; record it on the first run.

    Returns ``(constant, ok)``.
    """
    path = Path(path) if path is not None else BASELINE_PATH
    data = json.loads(path.read_text()) if path.exists() else {}
    key = baseline_key(domain, report)
    if key not in data:
        if not record:
            raise ConfigError(f"no regression constant recorded for {key}")
        data[key] = report.max_ratio
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    const = float(data[key])
    return const, bool(report.max_ratio <= const * (1 + rtol))
