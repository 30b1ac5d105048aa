"""Small-matrix algebra for Q-tensors.

Every function accepts arrays whose two leading axes are the matrix indices,
``(d, d, ...)``.  Trailing axes are broadcast, so the same code evaluates a
single ``d x d`` matrix or a whole matrix field sampled on a grid.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NonFiniteError

SKEW_TOL = 1e-12


def _dim(m: np.ndarray) -> int:
    if m.ndim < 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, 3):
        raise DimensionError(f"expected a (d, d, ...) array with d in {{2, 3}}, got shape {m.shape}")
    return m.shape[0]


def _same_dim(m: np.ndarray, n: np.ndarray) -> int:
    d = _dim(m)
    if _dim(n) != d:
        raise DimensionError(f"matrix dimensions differ: {m.shape[:2]} vs {n.shape[:2]}")
    return d


def identity(d: int, like: np.ndarray | None = None) -> np.ndarray:
    """Identity matrix broadcastable against ``like``'s trailing axes."""
    eye = np.eye(d)
    if like is None or like.ndim == 2:
        return eye
    return eye.reshape((d, d) + (1,) * (like.ndim - 2))


def transpose(m: np.ndarray) -> np.ndarray:
    return np.swapaxes(m, 0, 1)


def trace(m: np.ndarray) -> np.ndarray:
    return np.trace(m, axis1=0, axis2=1)


def matmul(m: np.ndarray, n: np.ndarray) -> np.ndarray:
    _same_dim(m, n)
    return np.einsum("ik...,kj...->ij...", m, n)


def sym_traceless_project(m: np.ndarray) -> np.ndarray:
    """Project onto symmetric traceless matrices: ``(m + m^T)/2 - tr(m)/d I``."""
    m = np.asarray(m, dtype=float)
    d = _dim(m)
    if not np.all(np.isfinite(m)):
        raise NonFiniteError("sym_traceless_project received non-finite entries")
    sym = 0.5 * (m + transpose(m))
    return sym - (trace(sym) / d) * identity(d, sym)


def commutator(m: np.ndarray, n: np.ndarray) -> np.ndarray:
    """``[M, N] = MN - NM``."""
    return matmul(m, n) - matmul(n, m)


def frobenius(m: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Entrywise product ``sum_ij M_ij N_ij``.

    Equals ``tr(MN)`` whenever ``N`` is symmetric.
    """
    _same_dim(m, n)
    return np.einsum("ij...,ij...->...", m, n)


def norm_sq(m: np.ndarray) -> np.ndarray:
    """Squared Frobenius norm ``|M|^2``."""
    return frobenius(m, m)


def is_skew(m: np.ndarray, tol: float = SKEW_TOL) -> bool:
    _dim(m)
    return bool(np.max(np.abs(m + transpose(m)), initial=0.0) <= tol)


def bulk_potential(q: np.ndarray, coeffs) -> np.ndarray:
    """Landau-de Gennes bulk energy density.

    ``(a/2) tr(Q^2) - (b/3) tr(Q^3) + (c/4) tr(Q^2)^2``
    """
    _dim(q)
    q2 = matmul(q, q)
    tr2 = trace(q2)
    tr3 = trace(matmul(q2, q))
    return 0.5 * coeffs.a * tr2 - coeffs.b / 3.0 * tr3 + 0.25 * coeffs.c * tr2**2


def molecular_field(q: np.ndarray, coeffs) -> np.ndarray:
    """Bulk molecular field ``-aQ + b(Q^2 - |Q|^2 I/d) - cQ|Q|^2``.

    This is minus the gradient of :func:`bulk_potential` restricted to
    symmetric traceless matrices.
    """
    d = _dim(q)
    q2 = matmul(q, q)
    nq = norm_sq(q)
    return (-coeffs.a * q
            + coeffs.b * (q2 - (nq / d) * identity(d, q))
            - coeffs.c * q * nq)


def corotational_flux(qdot: np.ndarray, omega: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Co-rotational flux ``N = Qdot - [Omega, Q]``.

    Raises if ``omega`` is not skew-symmetric within ``SKEW_TOL``.
    """
    _same_dim(qdot, q)
    if not is_skew(omega):
        raise ValueError("omega must be skew-symmetric")
    return qdot - commutator(omega, q)
