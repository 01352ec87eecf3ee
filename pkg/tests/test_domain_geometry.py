import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbarsolve import PlanarDomain, ProductDomain, domain_from_config
from dbarsolve.errors import ConfigError, DomainError


def test_disc_boundary_eval_at_zero(disc):
    p, tan, nrm = disc.boundary_eval(0.0)
    assert p == pytest.approx(1.0)
    assert tan == pytest.approx(1j)
    assert nrm == pytest.approx(1.0)


def test_disc_boundary_eval_quarter_turn(disc):
    p, _, nrm = disc.boundary_eval(np.pi / 2)
    assert p == pytest.approx(1j)
    assert nrm == pytest.approx(1j)


def test_ellipse_point_at_zero(ellipse):
    p, tan, nrm = ellipse.boundary_eval(0.0)
    assert p == pytest.approx(1.2)
    assert abs(nrm) == pytest.approx(1.0)
    assert abs((np.conj(nrm) * tan).real) < 1e-12
    assert ellipse.contains(p + 0.01 * nrm) == "exterior"


@pytest.mark.parametrize("z, label", [(0, "interior"), (1, "boundary"), (2, "exterior")])
def test_disc_contains(disc, z, label):
    assert disc.contains(z) == label


@pytest.mark.parametrize("z, d", [(0.3, 0.7), (0.0, 1.0)])
def test_disc_distance(disc, z, d):
    assert disc.dist_to_boundary(z) == pytest.approx(d, abs=1e-14)


def test_ellipse_distance_at_center(ellipse):
    assert ellipse.dist_to_boundary(0.0) == pytest.approx(0.8, abs=1e-10)


def test_ellipse_distance_against_dense_sampling(ellipse):
    t = np.linspace(0, 2 * np.pi, 200001)
    pts = ellipse.gamma(t)
    for z in (0.3 + 0.1j, -0.5 + 0.2j, 0.9):
        brute = np.min(np.abs(pts - z))
        assert ellipse.dist_to_boundary(z) == pytest.approx(brute, abs=1e-9)


def test_distance_rejects_exterior(disc):
    with pytest.raises(DomainError):
        disc.dist_to_boundary(1.5)


def test_disc_distance_random(disc, rng):
    z = 0.999 * np.sqrt(rng.random(1000)) * np.exp(2j * np.pi * rng.random(1000))
    got = np.array([disc.dist_to_boundary(x) for x in z])
    assert np.max(np.abs(got - (1 - np.abs(z)))) <= 1e-12


def test_jordan_winding_and_regularity(ellipse):
    assert ellipse.winding_number(ellipse.center) == pytest.approx(1.0, abs=1e-9)
    t = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    assert np.min(np.abs(ellipse.dgamma(t))) > 0


def test_boundary_points_classify_as_boundary(ellipse):
    for t in np.linspace(0, 2 * np.pi, 17):
        assert ellipse.contains(ellipse.gamma(t)) == "boundary"


def test_negative_orientation_rejected():
    with pytest.raises(DomainError, match="positively"):
        PlanarDomain.jordan({-1: 1.0})


def test_self_intersecting_curve_rejected():
    # a limacon with an inner loop
    with pytest.raises(DomainError, match="simple"):
        PlanarDomain.jordan({1: 0.5, 2: 1.0})


def test_config_round_trip(tmp_path, ellipse):
    cfg = {"factors": [{"kind": "disc"}, ellipse.to_config()]}
    path = tmp_path / "dom.json"
    path.write_text(json.dumps(cfg))
    dom = domain_from_config(path)
    assert isinstance(dom, ProductDomain) and dom.n == 2
    assert dom.factors[1].dist_to_boundary(0) == pytest.approx(0.8, abs=1e-10)


def test_config_unknown_kind():
    with pytest.raises(ConfigError):
        domain_from_config({"kind": "square"})


def test_product_distance_is_min_over_factors(bidisc):
    assert bidisc.dist_to_boundary((0.1, 0.5)) == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 0.95), st.floats(0, 2 * np.pi))
def test_disc_interior_points_property(r, a):
    disc = PlanarDomain.unit_disc()
    z = r * np.exp(1j * a)
    assert disc.contains(z) == "interior"
    assert disc.dist_to_boundary(z) == pytest.approx(1 - r, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.4), st.floats(0, 2 * np.pi))
def test_ellipse_boundary_eval_property(b, t):
    dom = PlanarDomain.ellipse(1.0, b)
    p, tan, nrm = dom.boundary_eval(t)
    assert abs(nrm) == pytest.approx(1.0)
    assert abs((np.conj(nrm) * tan).real) <= 1e-12 * abs(tan)
    assert dom.contains(p - 0.02 * nrm) == "interior"
