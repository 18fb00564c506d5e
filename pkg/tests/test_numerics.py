import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad
from scipy.linalg import expm

from climhouse.numerics import adaptive_simpson, matrix_exponential, psd_sqrt


def taylor_exp(m, terms=30):
    out = np.eye(m.shape[0])
    term = np.eye(m.shape[0])
    for k in range(1, terms):
        term = term @ m / k
        out = out + term
    return out


def test_expm_of_zero_is_identity():
    np.testing.assert_array_equal(matrix_exponential(np.zeros((3, 3)), 5.0), np.eye(3))


def test_expm_diagonal():
    got = matrix_exponential(np.diag([-1.0, -2.0]), 1.0)
    np.testing.assert_allclose(got, np.diag([math.exp(-1), math.exp(-2)]), rtol=1e-14)


def test_expm_rotation_matches_taylor():
    gen = np.array([[0.0, -1.0], [1.0, 0.0]])
    got = matrix_exponential(gen, math.pi / 2)
    np.testing.assert_allclose(got, taylor_exp(gen * math.pi / 2), atol=1e-13)
    np.testing.assert_allclose(got, [[0.0, -1.0], [1.0, 0.0]], atol=1e-13)


@pytest.mark.parametrize("scale", [1e-3, 0.1, 1.0, 4.0, 30.0])
def test_expm_matches_scipy_across_norms(scale, rng):
    m = rng.standard_normal((5, 5)) * scale
    np.testing.assert_allclose(matrix_exponential(m), expm(m), rtol=1e-11, atol=1e-12 * np.abs(expm(m)).max())


def test_expm_rejects_bad_input():
    with pytest.raises(ValueError):
        matrix_exponential(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        matrix_exponential(np.ones((2, 3)))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (3, 3), elements=st.floats(-2, 2)), st.floats(0, 3))
def test_expm_inverse_property(m, t):
    prod = matrix_exponential(m, t) @ matrix_exponential(m, -t)
    np.testing.assert_allclose(prod, np.eye(3), atol=1e-9)


def test_simpson_polynomial_exact():
    assert adaptive_simpson(lambda x: x**3 - 2 * x, 0.0, 2.0) == pytest.approx(0.0, abs=1e-12)
    assert adaptive_simpson(lambda x: 3 * x**2, 0.0, 1.0) == pytest.approx(1.0, rel=1e-14)


def test_simpson_reversed_and_empty():
    assert adaptive_simpson(math.exp, 1.0, 0.0) == pytest.approx(-(math.e - 1), rel=1e-10)
    assert adaptive_simpson(math.exp, 1.0, 1.0) == 0.0


def test_simpson_vector_valued_matches_quad():
    f = lambda x: np.array([math.sin(3 * x), math.exp(-x * x), 1 / (1 + x)])
    got = adaptive_simpson(f, 0.0, 4.0, rtol=1e-10)
    want = [quad(lambda x, i=i: f(x)[i], 0, 4, epsabs=1e-14)[0] for i in range(3)]
    np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-12)


def test_psd_sqrt_squares_back(rng):
    a = rng.standard_normal((4, 4))
    s = a @ a.T
    r = psd_sqrt(s)
    np.testing.assert_allclose(r, r.T)
    np.testing.assert_allclose(r @ r, s, atol=1e-12)


def test_psd_sqrt_clips_negative_eigenvalues():
    r = psd_sqrt(np.diag([4.0, -1e-14]))
    np.testing.assert_allclose(r, np.diag([2.0, 0.0]))
