"""Acceptance checks, one function per criterion, grouped into suites.

Each check returns a :class:`CriterionResult`; :func:`run_suite` runs a named
suite and :func:`results_csv` renders the machine-readable summary used by
``dbarsolve verify``.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernel_calculus, verify_norms
from .errors import ConfigError
from .forms import PolyForm
from .domain_geometry import PlanarDomain, ProductDomain
from .planar_kernels import KernelContext, solve_planar_T
from .product_operator import ProductOperator, ibp_check, mollify, MollifierSpec, solve_K, solve_K_many, solve_T


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: float
    threshold: float
    seconds: float = 0.0
    detail: str = ""
    extra: dict = field(default_factory=dict)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"criterion {self.number:2d} {flag} {self.name}: measured {self.measured:.3g} "
                f"vs {self.threshold:.3g} ({self.seconds:.1f} s) {self.detail}").rstrip()


def _timed(number, name, threshold, fn):
    t0 = time.perf_counter()
    passed, measured, detail, extra = fn()
    return CriterionResult(number, name, bool(passed), float(measured), threshold,
                           time.perf_counter() - t0, detail, extra)


# -- fixed data ------------------------------------------------------------------

def _dbar(n, terms):
    return PolyForm.dbar(n, terms)


#: Potentials ``g`` of the ten closed polynomial forms ``dbar g`` (degree <= 3) on the bidisc.
BIDISC_POTENTIALS = (
    [(1, (0, 0), (1, 0)), (1, (0, 0), (0, 1))],
    [(1, (0, 0), (1, 1))],
    [(1, (1, 0), (1, 0))],
    [(2 - 1j, (0, 1), (2, 0))],
    [(0.5j, (1, 0), (1, 1))],
    [(1, (0, 0), (3, 0)), (0.7, (0, 1), (0, 2))],
    [(1, (1, 1), (1, 1))],
    [(1, (0, 0), (1, 2)), (1j, (2, 0), (0, 1))],
    [(1 + 2j, (0, 2), (1, 0)), (-0.4, (0, 0), (0, 3))],
    [(0.8, (1, 0), (2, 1)), (0.3 - 0.2j, (1, 1), (0, 1))],
)

#: Potential of the tridisc smoke form.
TRIDISC_POTENTIAL = [(1, (0, 0, 0), (1, 1, 1)), (0.5, (0, 1, 0), (1, 0, 1))]


def bidisc_suite():
    return [_dbar(2, g) for g in BIDISC_POTENTIALS]


def tridisc_smoke_form():
    return _dbar(3, TRIDISC_POTENTIAL)


FACTOR_POINTS = tuple(r * np.exp(1j * a) for r, a in [(0.0, 0.0), (0.3, 0.4), (0.5, 2.0), (0.6, -2.2), (0.7, 4.0)])


def bidisc_grid():
    """The 5 x 5 target grid on the bidisc."""
    return np.array([(a, b) for a in FACTOR_POINTS for b in FACTOR_POINTS])


TRIDISC_TARGETS = np.array([
    (0.1 + 0.2j, -0.3j, 0.25),
    (0.45, 0.2 - 0.3j, -0.1 + 0.4j),
    (-0.35 - 0.2j, 0.5j, 0.0),
])


def factor_degree(f: PolyForm) -> int:
    """Bound on the per-factor degree of the canonical solution of a polynomial form."""
    deg = 0
    for comp in f.components:
        for a, b in comp:
            deg = max(deg, max(x + y for x, y in zip(a, b)))
    return deg + 1


# -- criterion 1 ---------------------------------------------------------------------

def criterion_1(seed: int = 1, count: int = 100, n_boundary: int = 256):
    """Nystrom L on the disc against its closed form."""
    def run():
        rng = np.random.default_rng(seed)
        circle = PlanarDomain.jordan({1: 1.0})
        ctx = KernelContext(circle, n_boundary)
        exact = KernelContext(PlanarDomain.unit_disc())
        r = 0.8 * np.sqrt(rng.random((count, 2)))
        a = 2 * np.pi * rng.random((count, 2))
        pts = r * np.exp(1j * a)
        worst = 0.0
        for w, z in pts:
            ref = exact.L(w, z)
            worst = max(worst, abs(ctx.L(w, z) - ref) / abs(ref))
        return worst <= 1e-10, worst, f"{count} pairs, N={n_boundary}", {}
    return _timed(1, "Nystrom L matches the disc closed form", 1e-10, run)


# -- criterion 2 ---------------------------------------------------------------------

def criterion_2():
    """Boundary vanishing slopes on the disc (both paths) and an ellipse."""
    def run():
        disc = KernelContext(PlanarDomain.unit_disc())
        circle = KernelContext(PlanarDomain.jordan({1: 1.0}))
        ellipse = KernelContext(PlanarDomain.ellipse())
        slopes = {
            "disc w=0": verify_norms.boundary_vanishing_scan(disc, 0.0),
            "disc w=0.5": verify_norms.boundary_vanishing_scan(disc, 0.5),
            "nystrom w=0": verify_norms.boundary_vanishing_scan(circle, 0.0),
            "nystrom w=0.5": verify_norms.boundary_vanishing_scan(circle, 0.5),
            "ellipse w=0.1": verify_norms.boundary_vanishing_scan(ellipse, 0.1),
        }
        dev = max(abs(v - 1.0) for k, v in slopes.items() if not k.startswith("ellipse"))
        ok = dev <= 0.1 and slopes["ellipse w=0.1"] >= 0.9
        detail = ", ".join(f"{k}: {v:.4f}" for k, v in slopes.items())
        return ok, dev, detail, slopes
    return _timed(2, "S vanishes linearly at the boundary", 0.1, run)


# -- criterion 3 ---------------------------------------------------------------------

def planar_targets():
    return np.array([r * np.exp(1j * t) for r in (0.0, 0.2, 0.45, 0.7)
                     for t in 2 * np.pi * np.arange(8) / 8 + 0.3])


def criterion_3(nr: int = 128, nt: int = 128):
    """Planar canonical solutions of 1, z and zbar."""
    def run():
        ctx = KernelContext(PlanarDomain.unit_disc())
        w = planar_targets()
        cases = {
            "1": (lambda z: np.ones_like(z), np.conj(w)),
            "z": (lambda z: z, np.abs(w) ** 2 - 0.5),
            "zbar": (lambda z: np.conj(z), np.conj(w) ** 2 / 2),
        }
        errs = {}
        for name, (f, exact) in cases.items():
            u = solve_planar_T(ctx, f, w, nr=nr, nt=nt)
            errs[name] = float(np.max(np.abs(u.values - exact)))
        worst = max(errs.values())
        return worst <= 1e-6, worst, ", ".join(f"f={k}: {v:.2e}" for k, v in errs.items()), errs
    return _timed(3, "planar canonical solutions", 1e-6, run)


# -- criterion 4 ---------------------------------------------------------------------

def _random_pairs(rng, count, n, radius=0.95):
    r = radius * np.sqrt(rng.random((2, n, count)))
    a = 2 * np.pi * rng.random((2, n, count))
    pts = r * np.exp(1j * a)
    return list(pts[0]), list(pts[1])


def criterion_4(seed: int = 4, count: int = 10_000):
    """Partition of unity: the e-kernels sum to the product of the S kernels."""
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for n in (2, 3):
            ctxs = [KernelContext(PlanarDomain.unit_disc()) for _ in range(n)]
            w, z = _random_pairs(rng, count, n)
            full = tuple(range(1, n + 1))
            total = sum(kernel_calculus.e_kernel(ctxs, kernel_calculus.IndexSet(full, j), w, z) for j in range(1, n + 1))
            prod = np.prod([ctxs[l].S(w[l], z[l]) for l in range(n)], axis=0)
            worst = max(worst, float(np.max(np.abs(total - prod) / np.abs(prod))))
        return worst <= 1e-13, worst, f"{count} points, n = 2, 3", {}
    return _timed(4, "partition of unity", 1e-13, run)


# -- criterion 5 ---------------------------------------------------------------------

def nested_dzbar(func, z, coords, h):
    """Nested centered Wirtinger differences ``d/dzbar_m`` for ``m`` in ``coords`` (0-based)."""
    if not coords:
        return func(z)
    m, rest = coords[0], coords[1:]

    def shifted(delta):
        zz = list(z)
        zz[m] = zz[m] + delta
        return nested_dzbar(func, zz, rest, h)

    dx = (shifted(h) - shifted(-h)) / (2 * h)
    dy = (shifted(1j * h) - shifted(-1j * h)) / (2 * h)
    return 0.5 * (dx + 1j * dy)


def richardson_dzbar(func, z, coords, h):
    """Richardson-extrapolated nested differences (fourth order in ``h``)."""
    coarse = nested_dzbar(func, z, coords, h)
    fine = nested_dzbar(func, z, coords, h / 2)
    return (4 * fine - coarse) / 3


def criterion_5(seed: int = 5, count: int = 100, h: float = 1e-4):
    """Symbolic kernel derivatives against finite differences."""
    def run():
        rng = np.random.default_rng(seed)
        worst, where = 0.0, ""
        for n in (1, 2, 3):
            ctxs = [KernelContext(PlanarDomain.unit_disc()) for _ in range(n)]
            w, z = _random_pairs(rng, count, n, radius=0.8)
            for l in range(n):
                # keep every pair off the diagonal set
                gap = z[l] - w[l]
                small = np.abs(gap) < 0.1
                z[l] = np.where(small, w[l] + 0.1 * np.exp(1j * np.angle(gap + 1e-300)), z[l])
                out = np.abs(z[l]) > 0.95
                z[l] = np.where(out, 0.95 * z[l] / np.abs(z[l]), z[l])
            for indices in kernel_calculus.index_sets(n):
                for j in range(1, len(indices) + 1):
                    idx = kernel_calculus.IndexSet(indices, j)
                    expr = kernel_calculus.e_kernel_derivative(idx)
                    sym = kernel_calculus.evaluate(expr, ctxs, idx.indices, w, z)
                    coords = [m - 1 for m in idx.others]
                    fd = richardson_dzbar(lambda zz: kernel_calculus.e_kernel(ctxs, idx, w, zz), z, coords, h)
                    rel = float(np.max(np.abs(sym - fd) / np.abs(fd)))
                    if rel > worst:
                        worst, where = rel, f"n={n} idx={indices} j={j}"
        return worst <= 1e-5, worst, f"worst at {where}", {}
    return _timed(5, "symbolic derivatives match finite differences", 1e-5, run)


# -- criterion 6 ---------------------------------------------------------------------

IBP_POTENTIALS = {
    2: [(1, (0, 0), (2, 1)), (1, (1, 0), (1, 2))],
    3: [(1, (1, 0, 0), (1, 1, 1)), (1, (0, 0, 0), (2, 1, 1))],
}


def criterion_6(dims=(2, 3), seed: int = 6):
    """Integration by parts with the measured sign."""
    def run():
        worst, signs, lines = 0.0, {}, []
        for n in dims:
            dom = ProductDomain.polydisc(n)
            op = ProductOperator(dom)
            f = _dbar(n, IBP_POTENTIALS[n])
            for indices in kernel_calculus.index_sets(n):
                if len(indices) < 2:
                    continue
                for j in range(1, len(indices) + 1):
                    res = ibp_check(dom, f, kernel_calculus.IndexSet(indices, j), seed=seed, operator=op)
                    scaled = res.residual / max(abs(res.lhs), 1.0)
                    worst = max(worst, scaled)
                    signs.setdefault(len(indices), set()).add(res.sign)
        for k, ss in sorted(signs.items()):
            lines.append(f"k={k}: sign {'/'.join(f'{s:+d}' for s in sorted(ss))}")
        return worst <= 1e-5, worst, "measured " + ", ".join(lines), {"signs": signs}
    return _timed(6, "integration by parts", 1e-5, run)


# -- criteria 7 and 8 ------------------------------------------------------------------

def criterion_7(dims=(2, 3)):
    """T = K on the bidisc suite and the tridisc smoke case."""
    def run():
        parts, ok, worst = [], True, 0.0
        if 2 in dims:
            dom = ProductDomain.polydisc(2)
            op = ProductOperator(dom)
            forms = bidisc_suite()
            targets = bidisc_grid()
            uk = solve_K_many(dom, forms, targets, operator=op)
            err = max(float(np.max(np.abs(a.values - solve_T(dom, f, targets, operator=op).values)))
                      for f, a in zip(forms, uk))
            ok &= err <= 1e-4
            worst = max(worst, err / 1e-4)
            parts.append(f"bidisc max |T-K| {err:.2e}")
        if 3 in dims:
            dom = ProductDomain.polydisc(3)
            op = ProductOperator(dom)
            f = tridisc_smoke_form()
            uk = solve_K(dom, f, TRIDISC_TARGETS, operator=op)
            ut = solve_T(dom, f, TRIDISC_TARGETS, operator=op)
            err = float(np.max(np.abs(uk.values - ut.values)))
            ok &= err <= 1e-3
            worst = max(worst, err / 1e-3)
            parts.append(f"tridisc max |T-K| {err:.2e}")
        return ok, worst, "; ".join(parts), {}
    return _timed(7, "T equals K (measured as a fraction of the tolerance)", 1.0, run)


BIDISC_CENTERS = np.array([(a, b) for a in FACTOR_POINTS[1:4] for b in FACTOR_POINTS[2:5]])
TRIDISC_CENTERS = TRIDISC_TARGETS[:2]
RESIDUAL_STEP = 0.05


def canonical_checks(dom, forms, centers, max_degree, op=None):
    """Residual and orthogonality of ``K f`` for each form; returns two lists."""
    op = op or ProductOperator(dom)
    stencil = verify_norms.stencil_targets(centers, RESIDUAL_STEP)
    fields = solve_K_many(dom, forms, stencil, operator=op)
    resid = [float(np.max(verify_norms.residual_dbar(dom, u, f))) for u, f in zip(fields, forms)]
    udeg = max(factor_degree(f) for f in forms)
    rule = verify_norms.orthogonality_rule(dom, udeg, max_degree)
    fields = solve_K_many(dom, forms, rule.nodes, operator=op)
    orth = [verify_norms.bergman_orthogonality(dom, u, max_degree, rule) for u in fields]
    return resid, orth


def criterion_8(dims=(2, 3), max_degree=None):
    """Residual and orthogonality of K on the suite of criterion 7."""
    max_degree = max_degree or {2: 2, 3: 1}

    def run():
        parts, ok, res_all, orth_all = [], True, [], []
        if 2 in dims:
            dom = ProductDomain.polydisc(2)
            resid, orth = canonical_checks(dom, bidisc_suite(), BIDISC_CENTERS, max_degree[2])
            res_all += resid
            orth_all += orth
            parts.append(f"bidisc residual {max(resid):.2e} orthogonality {max(orth):.2e}")
        if 3 in dims:
            dom = ProductDomain.polydisc(3)
            resid, orth = canonical_checks(dom, [tridisc_smoke_form()], TRIDISC_CENTERS, max_degree[3])
            res_all += resid
            orth_all += orth
            parts.append(f"tridisc residual {max(resid):.2e} orthogonality {max(orth):.2e}")
        rmax, omax = max(res_all), max(orth_all)
        ok = rmax <= 1e-4 and omax <= 1e-5
        measured = max(rmax / 1e-4, omax / 1e-5)
        return ok, measured, "; ".join(parts), {"residual": res_all, "orthogonality": orth_all}
    return _timed(8, "canonical property of K (fraction of tolerance)", 1.0, run)


# -- criterion 9 ---------------------------------------------------------------------

MONOTONE_RTOL = 1e-3


def criterion_9(resolutions=verify_norms.DEFAULT_RESOLUTIONS, families=verify_norms.FAMILIES, baseline_path=None,
                record: bool = True):
    """Lp ratios on the bidisc: bounded by the regression constant, not growing."""
    def run():
        dom = ProductDomain.polydisc(2)
        ok, parts, reports, worst = True, [], {}, 0.0
        for fam in families:
            rep = verify_norms.norm_scan(dom, "K", fam, resolutions=resolutions)
            reports[fam] = rep
            const, within = verify_norms.check_baseline(dom, rep, baseline_path, record)
            mono = rep.monotone_in_resolution(MONOTONE_RTOL)
            capped = rep.p_capped(MONOTONE_RTOL)
            slope = max(rep.p_slopes().values())
            fam_ok = within and all(mono.values()) and all(capped.values()) and rep.complete()
            ok &= fam_ok
            worst = max(worst, rep.max_ratio / const)
            bad = [f"{m} p={p:g}" for (m, p), v in mono.items() if not v]
            over = [f"{m} N={N}" for (m, N), v in capped.items() if not v]
            parts.append(f"{fam}: max {rep.max_ratio:.4f} (constant {const:.4f}), p-slope {slope:.3f}"
                         + (f", increasing in N at {', '.join(bad)}" if bad else "")
                         + (f", finite-p ratio above p=inf at {', '.join(over)}" if over else ""))
        return ok, worst, "; ".join(parts), {"reports": reports}
    return _timed(9, "Lp ratios (max ratio over regression constant)", 1.0, run)


# -- criterion 10 --------------------------------------------------------------------

MOLLIFIER_EPS = (0.2, 0.1, 0.05, 0.025)


def criterion_10(m: int = 257, eval_rule=(3, 6)):
    """``||K f^eps - K f||_2`` decreases along the mollification chain."""
    def run():
        dom = ProductDomain.polydisc(2)
        f = verify_norms.step_form(dom, m)
        forms = [f] + [mollify(dom, f, MollifierSpec(e)) for e in MOLLIFIER_EPS]
        rule = verify_norms.product_rule(dom, *eval_rule)
        fields = solve_K_many(dom, forms, rule.nodes)
        base = fields[0].values
        dists = [math.sqrt(float(np.sum(rule.weights * np.abs(u.values - base) ** 2))) for u in fields[1:]]
        ok = all(b <= 1.1 * a for a, b in zip(dists, dists[1:]))
        worst = max(b / a for a, b in zip(dists, dists[1:]))
        detail = ", ".join(f"eps={e:g}: {d:.3e}" for e, d in zip(MOLLIFIER_EPS, dists))
        return ok, worst, detail, {"distances": dists}
    return _timed(10, "mollification chain (worst successive ratio)", 1.1, run)


# -- criterion 11 --------------------------------------------------------------------

L1_SAMPLES = {
    2: [(0, 0), (0.3, 0.3j), (0.6, 0), (0.45j, -0.2), (-0.2 - 0.2j, 0.5)],
    3: [(0, 0, 0), (0.3, 0.3j, -0.1), (0.6, 0, 0.2j), (0.45j, -0.2, 0.3), (-0.2 - 0.2j, 0.5, 0)],
}
L1_RESOLUTIONS = {2: ((32, 8), (64, 16), (128, 32)), 3: ((8, 4), (12, 6), (16, 8))}


def criterion_11(dims=(2, 3)):
    """L1 norms of the derivative kernels: bounded and nearly independent of w."""
    def run():
        ok, worst, parts, scans = True, 0.0, [], []
        for n in dims:
            dom = ProductDomain.polydisc(n)
            full = tuple(range(1, n + 1))
            for j in range(1, n + 1):
                sc = verify_norms.l1_kernel_scan(dom, kernel_calculus.IndexSet(full, j), L1_SAMPLES[n], L1_RESOLUTIONS[n])
                scans.append(sc)
                ok &= sc.bounded and sc.spread <= 0.2
                worst = max(worst, sc.spread)
                parts.append(f"n={n} j={j}: spread {sc.spread:.3f}{'' if sc.bounded else ' unbounded'}")
        return ok, worst, "; ".join(parts), {"scans": scans}
    return _timed(11, "L1 kernel scan spread", 0.2, run)


# -- suites ----------------------------------------------------------------------------

CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11,
}

SUITES = {
    "disc-oracles": [(1, {}), (2, {}), (3, {})],
    "bidisc-identities": [(4, {}), (5, {}), (6, {"dims": (2,)}), (7, {"dims": (2,)}), (8, {"dims": (2,)})],
    "tridisc-smoke": [(6, {"dims": (3,)}), (7, {"dims": (3,)}), (8, {"dims": (3,)})],
    "all": [(k, {}) for k in range(1, 12)],
}


def run_suite(name: str, echo=None) -> list:
    if name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}; expected one of {', '.join(SUITES)}")
    out = []
    for number, kwargs in SUITES[name]:
        res = CRITERIA[number](**kwargs)
        if echo is not None:
            echo(res.line())
        out.append(res)
    return out


def results_csv(results) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["criterion", "name", "passed", "measured", "threshold", "seconds", "detail"])
    for r in results:
        wr.writerow([r.number, r.name, int(r.passed), format(r.measured, ".17g"), format(r.threshold, ".17g"),
                     format(r.seconds, ".3f"), r.detail])
    return buf.getvalue()
