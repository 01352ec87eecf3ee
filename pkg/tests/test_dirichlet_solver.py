import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbarsolve.dirichlet_solver import build
from dbarsolve.errors import NearBoundaryError
from dbarsolve.planar_kernels import cauchy_H


def disc_L(w, z):
    return np.conj(z) / (2j * np.pi * (1 - w * np.conj(z)))


@pytest.fixture(scope="module")
def disc64(disc):
    return build(disc, 64)


@pytest.fixture(scope="module")
def disc256(disc):
    return build(disc, 256)


def test_constant_data(disc64):
    g = np.full(disc64.n, 2.5 - 1j)
    for z in (0, 0.3 + 0.2j, -0.5j):
        assert disc64.extend(g, z) == pytest.approx(2.5 - 1j, abs=1e-12)
        assert abs(disc64.extend_dzbar(g, z)) < 1e-12


def test_exp_it_extends_to_z(disc64):
    g = np.exp(1j * disc64.t)
    z = 0.4 - 0.3j
    assert disc64.extend(g, z) == pytest.approx(z, abs=1e-12)


def test_real_part_and_its_dzbar(disc64):
    g = np.cos(disc64.t)
    z = 0.2 + 0.3j
    assert disc64.extend(g, z) == pytest.approx(z.real, abs=1e-12)
    assert disc64.extend_dzbar(g, z) == pytest.approx(0.5, abs=1e-12)


def test_cauchy_data_matches_closed_form(disc256):
    w, z = 0.3, 0.1 + 0.2j
    g = cauchy_H(w, disc256.nodes)
    assert abs(disc256.extend(g, z) - disc_L(w, z)) <= 1e-10 * abs(disc_L(w, z))


def test_cauchy_data_at_origin(disc256):
    g = cauchy_H(0.0, disc256.nodes)
    z = 0.25 - 0.4j
    assert disc256.extend(g, z) == pytest.approx(np.conj(z) / (2j * np.pi), abs=1e-12)


def test_dzbar_matches_closed_form(disc256):
    w, z = 0.5, 0.2 - 0.1j
    g = cauchy_H(w, disc256.nodes)
    exact = 1 / (2j * np.pi * (1 - w * np.conj(z)) ** 2)
    assert disc256.extend_dzbar(g, z) == pytest.approx(exact, rel=1e-10)


def test_dzbar_against_finite_differences(ellipse):
    s = build(ellipse, 256)
    g = cauchy_H(0.1 + 0.1j, s.nodes)
    h = 1e-5
    for z in (0.0, 0.3 - 0.2j, -0.4 + 0.3j):
        assert ellipse.dist_to_boundary(z) >= 0.2
        fd = 0.5 * ((s.extend(g, z + h) - s.extend(g, z - h)) / (2 * h)
                    + 1j * (s.extend(g, z + 1j * h) - s.extend(g, z - 1j * h)) / (2 * h))
        assert abs(s.extend_dzbar(g, z) - fd) <= 1e-7


def test_mean_value_property(disc64, rng):
    g = rng.standard_normal(disc64.n) + 1j * rng.standard_normal(disc64.n)
    assert disc64.extend(g, 0.0) == pytest.approx(np.mean(g), abs=1e-12)


def test_spectral_convergence(disc):
    w, z = 0.5, 0.3 + 0.3j
    errs = []
    for n in (32, 64, 128, 256):
        s = build(disc, n)
        ext = s.extension(cauchy_H(w, s.nodes))
        errs.append(abs(ext.value(z, allow_near=True) - disc_L(w, z)))
    # each doubling gains far more than any fixed algebraic order
    assert errs[1] < errs[0] / 100 and errs[2] < max(errs[1] / 100, 1e-14)
    assert errs[-1] < 1e-13


def test_near_boundary_refused(disc64):
    g = np.ones(disc64.n)
    with pytest.raises(NearBoundaryError):
        disc64.extend(g, 0.999)


def test_bad_node_count(disc):
    with pytest.raises(ValueError):
        build(disc, 31)


@settings(max_examples=20, deadline=None)
@given(st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3), st.integers(0, 10**6))
def test_linearity(alpha, beta, seed):
    from dbarsolve import PlanarDomain

    s = _ellipse_solver()
    r = np.random.default_rng(seed)
    g1 = r.standard_normal(s.n) + 1j * r.standard_normal(s.n)
    g2 = r.standard_normal(s.n) + 1j * r.standard_normal(s.n)
    z = 0.2 - 0.1j
    lhs = s.extend(alpha * g1 + beta * g2, z)
    rhs = alpha * s.extend(g1, z) + beta * s.extend(g2, z)
    scale = max(1.0, abs(alpha) + abs(beta)) * max(np.abs(g1).max(), np.abs(g2).max())
    assert abs(lhs - rhs) <= 1e-13 * scale
    assert isinstance(s.domain, PlanarDomain)


_SOLVER = {}


def _ellipse_solver():
    if "e" not in _SOLVER:
        from dbarsolve import PlanarDomain

        _SOLVER["e"] = build(PlanarDomain.ellipse(1.0, 0.2), 128)
    return _SOLVER["e"]
