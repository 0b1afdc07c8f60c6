import math

import numpy as np
import pytest

from mst_limits import spectral


def test_char_poly_identity_root():
    # prod(1+k) telescopes to m!, so 1 is always a root
    assert spectral.char_poly_eval(27, 1.0) == 0.0


def test_char_poly_small_values():
    assert spectral.char_poly_eval(5, 0.0) == pytest.approx(math.factorial(4) - math.factorial(5))
    assert spectral.char_poly_eval(4, -1.0) == pytest.approx(-24.0)


def test_char_poly_rejects_bad_m():
    with pytest.raises(spectral.SpectralError):
        spectral.char_poly_eval(1, 0.0)
    with pytest.raises(spectral.SpectralError):
        spectral.eigenvalues(61)


def test_eigenvalues_m3_hand_factorization():
    ev = spectral.eigenvalues(3)
    assert ev == pytest.approx(np.array([1.0, -4.0]), abs=1e-12)


def test_eigenvalues_m4_quadratic_formula():
    ev = spectral.eigenvalues(4)
    expected = np.array(
        [1.0, complex(-3.5, math.sqrt(23) / 2), complex(-3.5, -math.sqrt(23) / 2)]
    )
    assert ev == pytest.approx(expected, abs=1e-12)


def test_eigenvalues_m27_residuals_and_count():
    ev = spectral.eigenvalues(27)
    assert ev.size == 26
    assert abs(ev[0] - 1.0) < 1e-12  # sorted by real part: 1 leads
    assert spectral.residuals(27, ev).max() <= 1e-12


@pytest.mark.parametrize("m", range(3, 41))
def test_spectrum_structure_sweep(m):
    ev = spectral.eigenvalues(m)
    # 1 is a root and the unique root with maximal real part
    assert np.min(np.abs(ev - 1.0)) < 1e-10
    others = ev[np.abs(ev - 1.0) > 1e-10]
    assert np.all(others.real < 1.0 - 1e-6)
    # closed under conjugation, all roots simple
    for e in ev:
        assert np.min(np.abs(ev - np.conj(e))) < 1e-8
    dist = np.abs(ev[:, None] - ev[None, :])
    np.fill_diagonal(dist, np.inf)
    assert dist.min() > 1e-6


def test_lambda2_m4_exact():
    assert spectral.lambda2_of(4) == pytest.approx(complex(-3.5, math.sqrt(23) / 2), abs=1e-12)


def test_lambda2_m3_missing():
    with pytest.raises(spectral.NoSecondEigenvalueError):
        spectral.lambda2_of(3)


@pytest.mark.parametrize("m", range(4, 41))
def test_phase_transition_boundary(m):
    lam2 = spectral.lambda2_of(m)
    assert lam2.imag > 0
    if m <= 26:
        assert lam2.real < 0.5
    else:
        assert lam2.real > 0.5


def test_complex_binomial_matches_integer_binomial():
    for z in range(1, 8):
        for n in range(0, z + 1):
            assert spectral.complex_binomial(z, n) == pytest.approx(math.comb(z, n))


def test_eigenform_coeffs_are_binomials():
    lam = complex(0.3, 1.7)
    b = spectral.eigenform_coeffs(6, lam)
    expected = [spectral.complex_binomial(lam + k - 1, k - 1) for k in range(1, 6)]
    assert b == pytest.approx(np.array(expected), rel=1e-13)


@pytest.mark.parametrize("m", [10, 27])
def test_eigen_data_identities(m):
    sp = spectral.eigen_data(m)
    assert sp.u2_coeffs[0] == 1.0  # empty product
    rows = spectral.replacement_matrix(m)
    for k in range(1, m):
        lhs = k * (rows[k - 1] @ sp.u2_coeffs)
        rhs = sp.lambda2 * sp.u2_coeffs[k - 1]
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))
    assert abs(sp.u1_coeffs @ sp.v1 - 1.0) <= 1e-10
    assert abs(sp.u2_coeffs @ sp.v2 - 1.0) <= 1e-10
    assert abs(sp.u1_coeffs @ sp.v2) <= 1e-10
    assert abs(sp.u2_coeffs @ sp.v1) <= 1e-10


def test_eigen_data_u1_identity():
    sp = spectral.eigen_data(10)
    rows = spectral.replacement_matrix(10)
    # every replacement adds exactly one weighted gap
    for k in range(1, 10):
        assert rows[k - 1] @ sp.u1_coeffs == 1


def test_generator_matrix_characteristic_polynomial_agrees():
    # determinant route and product form must give the same polynomial values
    m = 7
    A = spectral.generator_matrix(m)
    for lam in (0.0, 0.5 + 1.2j, -2.0 + 0.1j):
        det = np.linalg.det(lam * np.eye(m - 1) - A)
        assert det == pytest.approx(spectral.char_poly_eval(m, lam), rel=1e-8)
