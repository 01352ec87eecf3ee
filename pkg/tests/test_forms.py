import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbarsolve import PlanarDomain, PolyForm, SampledForm, load_form
from dbarsolve.errors import ClosednessError, ConfigError


def test_closed_form_accepted():
    f = PolyForm(2, [[(1, (0, 0), (0, 1))], [(1, (0, 0), (1, 0))]])
    assert f.degree == 1


def test_non_closed_form_rejected():
    with pytest.raises(ClosednessError):
        PolyForm(2, [[(1, (0, 0), (0, 1))], []])


def test_dbar_of_potential_is_closed():
    g = [(1 + 1j, (1, 0), (2, 1)), (0.5, (0, 2), (1, 1))]
    f = PolyForm.dbar(2, g)
    f.check_closed()
    assert f.components[0] == {((1, 0), (1, 1)): 2 * (1 + 1j), ((0, 2), (0, 1)): 0.5}


def test_inline_and_file_formats_agree(tmp_path):
    f = PolyForm.from_text("poly: 1|0 0|0 1 ; 1|0 0|1 0")
    path = tmp_path / "f.txt"
    path.write_text(f.to_text())
    g = load_form(str(path))
    assert g.components == f.components


def test_inline_disc_constant():
    f = load_form("poly: 1|0|0")
    assert f.n == 1 and f.components == ({((0,), (0,)): 1 + 0j},)


def test_missing_form_file_names_path(tmp_path):
    path = tmp_path / "nope.txt"
    with pytest.raises(ConfigError, match="nope.txt"):
        load_form(str(path))


def test_component_count_mismatch():
    with pytest.raises(ConfigError):
        PolyForm.from_text("poly: 1|0 0|0 1", n=2)


def test_derivative_of_component():
    f = PolyForm.dbar(2, [(1, (0, 0), (2, 2))])
    # f_2 = 2 zbar1^2 zbar2, d/dzbar1 -> 4 zbar1 zbar2
    assert f.derivative(2, (1,)) == {((0, 0), (1, 1)): 4 + 0j}


def test_sampled_form_interpolates_smooth_data():
    disc = PlanarDomain.unit_disc()
    f = SampledForm.from_functions([disc], 129, [[(1.0, [lambda z: z * np.conj(z)])]], order=3)
    z = np.array([0.1 + 0.2j, -0.5 + 0.3j])
    assert np.max(np.abs(f.component_values(1, [z]) - np.abs(z) ** 2)) < 1e-6


def test_sampled_csv_round_trip(tmp_path):
    disc = PlanarDomain.unit_disc()
    f = SampledForm.from_functions([disc, disc], 17, [[(1.0, [lambda z: z, None])], [(2.0, [None, np.conj])]])
    path = tmp_path / "f.csv"
    f.to_csv(path)
    g = load_form(str(path))
    assert isinstance(g, SampledForm) and g.n == 2
    pts = [np.array([0.1, 0.2j]), np.array([-0.3, 0.4])]
    for j in (1, 2):
        assert np.array_equal(g.component_values(j, pts), f.component_values(j, pts))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 2), st.integers(0, 2),
                          st.floats(-2, 2)), min_size=1, max_size=4))
def test_dbar_potentials_always_closed(terms):
    g = [(c, (a1, a2), (b1, b2)) for a1, a2, b1, b2, c in terms]
    PolyForm.dbar(2, g).check_closed()
