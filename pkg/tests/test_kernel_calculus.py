import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbarsolve import PlanarDomain
from dbarsolve.errors import SingularityError
from dbarsolve.kernel_calculus import (Const, IndexSet, e_kernel, e_kernel_derivative, e_kernel_expr, eval_expr,
                                       evaluate, expr_size, index_sets, weight_B)
from dbarsolve.planar_kernels import KernelContext


def ctxs(n):
    return [KernelContext(PlanarDomain.unit_disc()) for _ in range(n)]


def random_points(rng, count, n, radius=0.8):
    def pts():
        return [radius * np.sqrt(rng.random(count)) * np.exp(2j * np.pi * rng.random(count)) for _ in range(n)]
    return pts(), pts()


def test_weight_B_single_factor():
    assert weight_B([0.3], [0.1j]) == 1


def test_weight_B_two_factors():
    assert weight_B([0, 0], [1, 2j]) == pytest.approx(5.0)


def test_weight_B_diagonal():
    assert weight_B([0.1, 0.2], [0.1, 0.2]) == 0


def test_index_sets_strictly_increasing():
    sets = list(index_sets(3))
    assert sets == [(1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]


@pytest.mark.parametrize("indices, j", [((2, 1), 1), ((1, 1), 1), ((1, 2), 3), ((0, 1), 1)])
def test_index_set_validation(indices, j):
    with pytest.raises(ValueError):
        IndexSet(indices, j)


def test_single_factor_kernel_is_S():
    c = ctxs(2)
    w, z = (0.1, 0.2j), (0.5 - 0.1j, 0.3)
    assert e_kernel(c, IndexSet((2,), 1), w, z) == pytest.approx(c[1].S(0.2j, 0.3))
    assert str(e_kernel_derivative(IndexSet((1,), 1))) == "S_1"


@pytest.mark.parametrize("n", [2, 3])
def test_partition_of_unity(n, rng):
    c = ctxs(n)
    w, z = random_points(rng, 2000, n)
    idx = tuple(range(1, n + 1))
    total = sum(e_kernel(c, IndexSet(idx, j), w, z) for j in range(1, n + 1))
    prod = np.prod([c[m].S(w[m], z[m]) for m in range(n)], axis=0)
    assert np.max(np.abs(total - prod) / np.abs(prod)) <= 1e-13


def test_boundary_factor_zeroes_kernel():
    c = ctxs(2)
    val = e_kernel(c, IndexSet((1, 2), 1), (0.1, 0.2), (0.3j, np.exp(0.4j)))
    assert val == 0


def test_double_diagonal_raises():
    c = ctxs(2)
    with pytest.raises(SingularityError):
        e_kernel(c, IndexSet((1, 2), 1), (0.1, 0.2), (0.1, 0.2))


def test_dump_of_s2_derivative():
    assert str(e_kernel_derivative(IndexSet((1, 2), 2))) == (
        "dSdzbar_1*S_2*u_1/(u_1 + u_2) - S_1*S_2*(w_1 - z_1)*u_2/(u_1 + u_2)^2")


def test_s2_derivative_symmetry():
    # j=1 at swapped coordinates equals j=2 at the original ones
    c = ctxs(2)
    w, z = (0.2, -0.1j), (0.5 + 0.1j, 0.3 - 0.4j)
    w_sw, z_sw = (w[1], w[0]), (z[1], z[0])
    va = evaluate(e_kernel_derivative(IndexSet((1, 2), 2)), c, (1, 2), w, z)
    vb = evaluate(e_kernel_derivative(IndexSet((1, 2), 1)), c, (1, 2), w_sw, z_sw)
    assert va == pytest.approx(vb, rel=1e-14)


def test_hand_derived_s2_formula():
    c = ctxs(2)
    w, z = (0.0, 0.0), (0.5, 0.3j)
    S1, S2 = c[0].S(0, 0.5), c[1].S(0, 0.3j)
    dS1 = c[0].dS(0, 0.5)
    u1, u2 = 0.25, 0.09
    B = u1 + u2
    hand = dS1 * S2 * u1 / B - S1 * S2 * (0 - 0.5) * u2 / B**2
    got = evaluate(e_kernel_derivative(IndexSet((1, 2), 2)), c, (1, 2), w, z)
    assert got == pytest.approx(hand, rel=1e-14)


def _fd(func, z, coords, h=1e-4):
    if not coords:
        return func(z)
    m, rest = coords[0], coords[1:]

    def sh(d):
        zz = list(z)
        zz[m] = zz[m] + d
        return _fd(func, zz, rest, h)
    return 0.5 * ((sh(h) - sh(-h)) / (2 * h) + 1j * (sh(1j * h) - sh(-1j * h)) / (2 * h))


def test_s2_derivative_finite_difference_spec_point():
    c = ctxs(2)
    idx = IndexSet((1, 2), 2)
    w, z = (0.0, 0.0), (0.5, 0.3j)
    got = evaluate(e_kernel_derivative(idx), c, (1, 2), w, z)
    fd = _fd(lambda zz: e_kernel(c, idx, w, zz), z, [0])
    assert abs(got - fd) <= 1e-6 * abs(fd)


def test_constant_expression():
    assert eval_expr(Const(2.5 - 1j), {}) == 2.5 - 1j


def test_expression_size_is_deterministic():
    sizes = {expr_size(e_kernel_derivative(IndexSet((1, 2, 3), j))) for j in (1, 2, 3)}
    again = {expr_size(e_kernel_derivative(IndexSet((1, 2, 3), j))) for j in (1, 2, 3)}
    assert sizes == again
    assert str(e_kernel_derivative(IndexSet((1, 2, 3), 1))) == str(e_kernel_derivative(IndexSet((1, 2, 3), 1)))


def test_printed_expression_reevaluates(rng):
    # independent evaluation of the printed formula with python's own arithmetic
    c = ctxs(3)
    idx = IndexSet((1, 2, 3), 2)
    expr = e_kernel_derivative(idx)
    text = str(expr).replace("^", "**")
    w, z = random_points(rng, 1, 3)
    w = [complex(x[0]) for x in w]
    z = [complex(x[0]) for x in z]
    env = {"conj": np.conj}
    for m in (1, 2, 3):
        env[f"S_{m}"] = c[m - 1].S(w[m - 1], z[m - 1])
        env[f"dSdzbar_{m}"] = c[m - 1].dS(w[m - 1], z[m - 1])
        env[f"u_{m}"] = abs(w[m - 1] - z[m - 1]) ** 2
        env[f"w_{m}"] = w[m - 1]
        env[f"z_{m}"] = z[m - 1]
    direct = eval(text, {"__builtins__": {}}, env)
    assert evaluate(expr, c, idx.indices, w, z) == pytest.approx(direct, rel=1e-14)


def test_undifferentiated_expression_matches_direct_kernel(rng):
    c = ctxs(3)
    w, z = random_points(rng, 50, 3)
    for j in (1, 2, 3):
        idx = IndexSet((1, 2, 3), j)
        sym = evaluate(e_kernel_expr(idx), c, idx.indices, w, z)
        assert np.allclose(sym, e_kernel(c, idx, w, z), rtol=1e-13, atol=0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([(1, 2), (1, 3), (2, 3), (1, 2, 3)]), st.integers(1, 3))
def test_derivatives_match_finite_differences(seed, indices, j):
    if j > len(indices):
        return
    r = np.random.default_rng(seed)
    c = ctxs(3)
    w, z = random_points(r, 1, 3, radius=0.7)
    w = [complex(x[0]) for x in w]
    z = [complex(x[0]) for x in z]
    for m in range(3):
        gap = z[m] - w[m]
        if abs(gap) < 0.1:
            z[m] = w[m] + 0.1 * np.exp(1j * np.angle(gap))
    idx = IndexSet(indices, j)
    sym = evaluate(e_kernel_derivative(idx), c, indices, w, z)
    coords = [m - 1 for m in idx.others]
    coarse = _fd(lambda zz: e_kernel(c, idx, w, zz), z, coords, 1e-3)
    fine = _fd(lambda zz: e_kernel(c, idx, w, zz), z, coords, 5e-4)
    fd = (4 * fine - coarse) / 3
    assert abs(sym - fd) <= 1e-5 * abs(fd)
