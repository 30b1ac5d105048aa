import numpy as np
import pytest

from qiansheng import tensor_core as tc
from qiansheng.coefficients import MaterialCoefficients
from qiansheng.errors import DimensionError, NonFiniteError

from conftest import random_skew, random_sym_traceless


def test_projection_is_idempotent_and_lands_in_s0(rng):
    for d in (2, 3):
        m = rng.standard_normal((d, d, 5, 5))
        p = tc.sym_traceless_project(m)
        np.testing.assert_allclose(tc.trace(p), 0.0, atol=1e-14)
        np.testing.assert_allclose(p, tc.transpose(p), atol=0)
        np.testing.assert_allclose(tc.sym_traceless_project(p), p, atol=1e-15)


def test_projection_rejects_non_finite():
    m = np.eye(2)
    m[0, 1] = np.nan
    with pytest.raises(NonFiniteError):
        tc.sym_traceless_project(m)


def test_dimension_checks():
    with pytest.raises(DimensionError):
        tc.matmul(np.eye(2), np.eye(3))
    with pytest.raises(DimensionError):
        tc.sym_traceless_project(np.ones((4, 4)))
    with pytest.raises(DimensionError):
        tc.frobenius(np.eye(2), np.eye(3))


def test_matmul_broadcasts_over_grid(rng):
    a = rng.standard_normal((3, 3, 4))
    b = rng.standard_normal((3, 3, 4))
    out = tc.matmul(a, b)
    for i in range(4):
        np.testing.assert_allclose(out[..., i], a[..., i] @ b[..., i], rtol=1e-14)


def test_identity_broadcast_shape():
    like = np.zeros((3, 3, 4, 4))
    assert tc.identity(3, like).shape == (3, 3, 1, 1)
    assert tc.identity(2).shape == (2, 2)


def test_commutator_of_symmetric_pair_is_skew(rng):
    q = random_sym_traceless(rng, 3)
    n = random_sym_traceless(rng, 3)
    assert tc.is_skew(tc.commutator(q, n), tol=1e-13)


def test_frobenius_is_trace_of_product_for_symmetric(rng):
    q = random_sym_traceless(rng, 3)
    a = random_sym_traceless(rng, 3)
    assert tc.frobenius(q, a) == pytest.approx(np.trace(q @ a), abs=1e-14)


def test_corotational_flux_requires_skew(rng):
    q = random_sym_traceless(rng, 2)
    with pytest.raises(ValueError):
        tc.corotational_flux(q, np.eye(2), q)
    w = random_skew(rng, 2)
    n = tc.corotational_flux(q, w, q)
    np.testing.assert_allclose(n, q - (w @ q - q @ w), atol=1e-15)


def test_bulk_potential_quadratic_only():
    c = MaterialCoefficients(1.5, 0.0, 0.0, 1, 1, 0, 1, 0, 0, 1, 0, 0)
    q = np.diag([1.0, -1.0])
    assert float(tc.bulk_potential(q, c)) == pytest.approx(0.75 * 2.0)
    np.testing.assert_allclose(tc.molecular_field(q, c), -1.5 * q)


def test_molecular_field_is_traceless_symmetric(rng, coeffs):
    for d in (2, 3):
        q = random_sym_traceless(rng, d, (6,))
        h = tc.molecular_field(q, coeffs)
        np.testing.assert_allclose(tc.trace(h), 0.0, atol=1e-13)
        np.testing.assert_allclose(h, tc.transpose(h), atol=1e-15)
