import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dbarsolve import PlanarDomain, PolyForm, ProductDomain
from dbarsolve.errors import ConfigError, NearBoundaryError, UnsupportedError
from dbarsolve.kernel_calculus import IndexSet
from dbarsolve.planar_kernels import KernelContext, SolutionField
from dbarsolve.product_operator import solve_K
from dbarsolve.verify_norms import (NormReport, bergman_orthogonality, boundary_vanishing_scan, check_baseline,
                                    family_members, l1_kernel_scan, multi_degrees, norm_scan, orthogonality_rule,
                                    product_rule, residual_dbar, stencil_targets)

DZBAR1 = PolyForm(2, [[(1, (0, 0), (0, 0))], []])


def field(targets, fn):
    t = np.asarray(targets)
    return SolutionField(t, fn(t))


# -- residual ------------------------------------------------------------------

def test_residual_exact_polynomial(bidisc):
    t = stencil_targets([[0.1 + 0.2j, -0.3], [0.0, 0.4j]], 0.05)
    u = field(t, lambda t: np.conj(t[:, 0]))
    assert np.max(residual_dbar(bidisc, u, DZBAR1)) <= 1e-10


def test_residual_detects_nonholomorphic_perturbation(bidisc):
    centers = np.array([[0.5, 0.1], [0.3j, -0.2]])
    t = stencil_targets(centers, 0.05)
    u = field(t, lambda t: np.conj(t[:, 0]) + 0.01 * np.conj(t[:, 0]) ** 2)
    res = residual_dbar(bidisc, u, DZBAR1)
    assert res[0] == pytest.approx(0.02 * np.max(np.abs(centers[:, 0])), rel=1e-8)


def test_residual_refuses_stencil_near_boundary(bidisc):
    t = stencil_targets([[0.95, 0.0]], 0.05)
    with pytest.raises(NearBoundaryError):
        residual_dbar(bidisc, field(t, lambda t: t[:, 0]), DZBAR1)


def test_residual_needs_stencil_layout(bidisc):
    with pytest.raises(ValueError):
        residual_dbar(bidisc, field(np.zeros((3, 2)), lambda t: t[:, 0]), DZBAR1)


def test_residual_of_K_solution(bidisc, light_res):
    f = PolyForm.dbar(2, [(1, (1, 0), (1, 1))])
    t = stencil_targets([[0.2 - 0.1j, 0.3j]], 0.05)
    u = solve_K(bidisc, f, t, light_res)
    assert np.max(residual_dbar(bidisc, u, f)) <= 1e-4


# -- orthogonality ---------------------------------------------------------------

def test_multi_degrees_count():
    assert len(multi_degrees(2, 2)) == 6
    assert multi_degrees(2, 1) == [(0, 0), (0, 1), (1, 0)]


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 3), u_degree=st.integers(0, 4), max_degree=st.integers(0, 3), data=st.data())
def test_orthogonality_rule_is_exact(n, u_degree, max_degree, data):
    dom = ProductDomain.polydisc(n)
    rule = orthogonality_rule(dom, u_degree, max_degree)
    a = data.draw(st.lists(st.integers(0, u_degree), min_size=n, max_size=n))
    b = [data.draw(st.integers(0, u_degree - x)) for x in a]
    alpha = data.draw(st.lists(st.integers(0, max_degree), min_size=n, max_size=n).filter(
        lambda v: sum(v) <= max_degree))
    z = rule.nodes
    vals = np.prod(z ** np.array(a) * np.conj(z) ** np.array(b) * np.conj(z ** np.array(alpha)), axis=1)
    # oracle: int_disc w^a wbar^(b + alpha) dA = 2 pi / (a + b + alpha + 2) if a = b + alpha else 0
    exact = math.prod(2 * math.pi / (x + y + g + 2) if x == y + g else 0.0 for x, y, g in zip(a, b, alpha))
    assert abs(np.sum(rule.weights * vals) - exact) <= 1e-12
    mono = np.abs(np.prod(z ** np.array(alpha), axis=1)) ** 2
    assert np.sum(rule.weights * mono) == pytest.approx(math.prod(math.pi / (g + 1) for g in alpha), rel=1e-12)


def test_wbar_is_orthogonal(disc):
    rule = orthogonality_rule(disc, 1, 6)
    assert bergman_orthogonality(disc, field(rule.nodes, lambda t: np.conj(t[:, 0])), 6, rule) <= 1e-10


def test_constant_shift_detected(disc):
    rule = orthogonality_rule(disc, 1, 6)
    val = bergman_orthogonality(disc, field(rule.nodes, lambda t: np.conj(t[:, 0]) + 0.1), 6, rule)
    # oracle: <wbar + 0.1, 1> / (||wbar + 0.1|| ||1||) = 0.1 / sqrt(0.5 + 0.01)
    assert val == pytest.approx(0.1 / math.sqrt(0.51), rel=1e-10)


def test_K_solution_is_orthogonal(disc):
    dom = ProductDomain.polydisc(1)
    f = PolyForm(1, [[(1, (1,), (0,))]])
    rule = orthogonality_rule(dom, 2, 4)
    u = solve_K(dom, f, rule.nodes)
    assert np.max(np.abs(u.values - (np.abs(rule.nodes[:, 0]) ** 2 - 0.5))) <= 1e-10
    assert bergman_orthogonality(dom, u, 4, rule) <= 1e-6


def test_holomorphic_addition_detected(bidisc, light_res):
    f = PolyForm.dbar(2, [(1, (0, 0), (1, 1))])
    rule = orthogonality_rule(bidisc, 2, 2)
    u = solve_K(bidisc, f, rule.nodes, light_res)
    assert bergman_orthogonality(bidisc, u, 2, rule) <= 1e-5
    bad = SolutionField(u.targets, u.values + 0.01 * rule.nodes[:, 0] * rule.nodes[:, 1])
    assert bergman_orthogonality(bidisc, bad, 2, rule) > 1e-3


def test_orthonormal_basis_on_ellipse(ellipse):
    rule = product_rule(ellipse, 24, 48)
    z = rule.nodes[:, 0]
    mons = np.stack([z**k for k in range(5)], 1)
    sw = np.sqrt(rule.weights)
    # oracle: wbar minus its weighted least-squares fit by holomorphic polynomials
    coef = np.linalg.lstsq(sw[:, None] * mons, sw * np.conj(z), rcond=None)[0]
    resid = SolutionField(rule.nodes, np.conj(z) - mons @ coef)
    assert bergman_orthogonality(ellipse, resid, 4, rule) <= 1e-12
    hol = field(rule.nodes, lambda t: 1 + t[:, 0] ** 2)
    assert bergman_orthogonality(ellipse, hol, 4, rule) >= 0.5


def test_rule_mismatch_rejected(disc):
    rule = orthogonality_rule(disc, 1, 2)
    with pytest.raises(ValueError):
        bergman_orthogonality(disc, field(rule.nodes[:3], lambda t: t[:, 0]), 2, rule)


# -- boundary vanishing ---------------------------------------------------------------

@pytest.mark.parametrize("w, tol", [(0, 0.05), (0.5, 0.1)])
def test_disc_boundary_slope(disc_ctx, w, tol):
    assert boundary_vanishing_scan(disc_ctx, w) == pytest.approx(1.0, abs=tol)


def test_ellipse_boundary_slope(ellipse_ctx):
    assert boundary_vanishing_scan(ellipse_ctx, 0.1j) >= 0.9


# -- L1 scans -------------------------------------------------------------------------

def test_l1_trivial_kernel_is_area():
    dom = ProductDomain.polydisc(1)
    scan = l1_kernel_scan(dom, IndexSet((1,), 1), [0.0, 0.4], ((32, 8),), exclusion=0, trivial=True)
    assert np.allclose(scan.values, np.pi, rtol=1e-12)


def test_l1_single_factor_spread():
    dom = ProductDomain.polydisc(1)
    scan = l1_kernel_scan(dom, IndexSet((1,), 1), [0.0, 0.3, 0.6], ((32, 8), (64, 16), (128, 32)))
    assert scan.bounded and scan.spread <= 0.2


def test_l1_single_factor_oracle_at_center():
    # int_disc |S(0, z)| dA = int (1 - r^2) / (2 pi r) r dr dtheta = 1 - 1/3
    dom = ProductDomain.polydisc(1)
    exact = l1_kernel_scan(dom, IndexSet((1,), 1), [0.0], ((64, 16),), exclusion=0)
    assert exact.values[0, 0] == pytest.approx(2 / 3, rel=1e-12)
    # the excluded mass shrinks with the exclusion radius and extrapolates away
    scan = l1_kernel_scan(dom, IndexSet((1,), 1), [0.0], ((64, 16), (128, 32), (256, 64)))
    deficits = 2 / 3 - scan.values[0]
    assert np.all(deficits > 0) and np.all(np.diff(deficits) < 0)
    assert scan.extrapolated[0] == pytest.approx(2 / 3, rel=1e-2)


# -- norm scans -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def poly_report(bidisc):
    return norm_scan(bidisc, "K", "polynomials", p_list=(1, 2, 4, math.inf), resolutions=(32,))


@pytest.mark.parametrize("p", [1, 2, 4])
def test_dzbar1_ratio_matches_exact(poly_report, p):
    # ||wbar_1||_p / ||1||_p on the bidisc = (2 / (p + 2))^(1/p)
    assert poly_report.ratio("dzbar1", float(p), 32) == pytest.approx((2 / (p + 2)) ** (1 / p), rel=1e-3)


def test_dzbar1_sup_ratio_at_most_one(poly_report):
    assert poly_report.ratio("dzbar1", math.inf, 32) <= 1.0 + 1e-9


def test_report_shape_and_csv(poly_report, tmp_path):
    assert poly_report.complete()
    text = poly_report.to_csv(tmp_path / "r.csv")
    head, *rows = text.splitlines()
    assert head.startswith("operator,family,member,p,resolution")
    assert len(rows) == len(poly_report.rows)
    assert "max ratio" in poly_report.summary()


def test_zero_family(bidisc):
    members = family_members(bidisc, "zero", 32)
    assert members[0][1].is_zero()
    rep = norm_scan(bidisc, "T", "zero", p_list=(2,), resolutions=(32,))
    assert rep.max_ratio == 0


def test_unknown_family(bidisc):
    with pytest.raises(ConfigError):
        norm_scan(bidisc, "K", "nope", resolutions=(32,))


def test_T_rejects_sampled_family(bidisc):
    with pytest.raises(UnsupportedError):
        norm_scan(bidisc, "T", "oscillatory", p_list=(2,), resolutions=(32,))


def test_report_flags():
    rep = NormReport("K", "demo")
    for N, r in ((32, 0.5), (64, 0.49), (128, 0.495)):
        for p in (1.0, math.inf):
            rep.rows.append(("a", p, N, 1.0, r if p == 1.0 else r + 0.1, r if p == 1.0 else r + 0.1))
    assert rep.monotone_in_resolution() == {("a", 1.0): False, ("a", math.inf): False}
    assert rep.monotone_in_resolution(0.02)[("a", 1.0)]
    assert all(rep.p_capped().values())


def test_baseline_recorded_then_enforced(tmp_path, bidisc):
    path = tmp_path / "base.json"
    rep = NormReport("K", "demo", [("a", 2.0, 32, 1.0, 0.5, 0.5)])
    const, ok = check_baseline(bidisc, rep, path)
    assert ok and const == 0.5 and json.loads(path.read_text())
    worse = NormReport("K", "demo", [("a", 2.0, 32, 1.0, 0.6, 0.6)])
    assert check_baseline(bidisc, worse, path) == (0.5, False)
    with pytest.raises(ConfigError):
        check_baseline(ProductDomain((PlanarDomain.unit_disc(), PlanarDomain.ellipse())), rep, path, record=False)


def test_kernel_context_fixture_is_disc(disc_ctx):
    assert isinstance(disc_ctx, KernelContext) and disc_ctx.domain.is_disc
