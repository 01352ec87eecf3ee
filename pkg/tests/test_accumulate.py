import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbarsolve import accumulate as acc
from dbarsolve.quadrature import duffy_table

needs_compiled = pytest.mark.skipif(acc._compiled is None, reason="compiled kernel not built")


def inputs(s, nt, nr, seed, n_comp=3, n_terms=4):
    rng = np.random.default_rng(seed)
    tab = duffy_table(s, nr, grade=2)
    ntau = len(tab.tau)
    shape_f, shape_g = (n_comp, s, nt, ntau), (n_terms, s, nt, ntau)
    F = rng.standard_normal(shape_f) + 1j * rng.standard_normal(shape_f)
    G = rng.standard_normal(shape_g) + 1j * rng.standard_normal(shape_g)
    U = rng.uniform(0.05, 1.0, (s, nt, ntau)) * tab.tau[None, None, :] ** 2
    return (F, np.arange(n_comp) % 2, G, np.arange(n_terms) % 3, U, tab.index, tab.weight, 2,
            np.arange(n_terms), np.arange(n_terms) % 2)


def test_single_factor_constant_integrand():
    # s = 1, all channels 1: mode 0 sums the table weights once per angle
    tab = duffy_table(1, 5)
    ntau, nt = len(tab.tau), 3
    ones = np.ones((1, 1, nt, ntau), dtype=complex)
    U = np.ones((1, nt, ntau))
    out = acc.accumulate(ones, [0], ones, [0], U, tab.index, tab.weight, 1, [0], [0], backend="python")
    assert out[0] == pytest.approx(nt * tab.weight.sum(), rel=1e-14)


@needs_compiled
@pytest.mark.parametrize("s, nt, nr", [(1, 8, 6), (2, 6, 4), (3, 4, 3)])
@pytest.mark.parametrize("mode", [0, 1])
@pytest.mark.parametrize("exclude", [0.0, 2e-3])
def test_backends_agree(s, nt, nr, mode, exclude):
    args = inputs(s, nt, nr, seed=s * 10 + mode)
    a = np.atleast_1d(acc.accumulate(*args, mode=mode, exclude=exclude, backend="python"))
    b = np.atleast_1d(acc.accumulate(*args, mode=mode, exclude=exclude, backend="cython"))
    assert np.max(np.abs(a - b)) <= 1e-12 * max(np.max(np.abs(a)), 1.0)


@needs_compiled
@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0.0, 1e-4, 1e-2]))
def test_backends_agree_property(seed, exclude):
    args = inputs(2, 5, 3, seed)
    a = acc.accumulate(*args, mode=1, exclude=exclude, backend="python")
    b = acc.accumulate(*args, mode=1, exclude=exclude, backend="cython")
    assert abs(a - b) <= 1e-12 * max(abs(a), 1.0)


def test_exclusion_only_removes_mass():
    args = inputs(2, 6, 4, seed=3)
    full = acc.accumulate(*args, mode=1, exclude=0.0, backend="python")
    cut = acc.accumulate(*args, mode=1, exclude=1e-2, backend="python")
    assert 0 < cut < full


def test_unknown_backend():
    with pytest.raises(ValueError):
        acc.accumulate(*inputs(1, 4, 3, 0), backend="fortran")


def test_pure_python_selected_by_environment():
    env = dict(os.environ, DBAR_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from dbarsolve import accumulate; print(accumulate.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
