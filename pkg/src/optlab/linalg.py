"""Dense float64 linear algebra used by every preconditioner.

Factorizations are delegated to LAPACK via numpy, then post-processed with
deterministic sign conventions so repeated runs produce bitwise-identical
factors. The Newton-Schulz matrix-sign iteration is implemented directly.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DegenerateInputError, ShapeError, SingularMatrixError

NS_COEFFS = (3.4445, -4.7750, 2.0315)
NS_STEPS = 5


class SymEig(NamedTuple):
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # orthonormal columns


class SvdResult(NamedTuple):
    """Reduced SVD with singular values descending."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray  # columns are right singular vectors


def _as_f64_matrix(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ShapeError(f"{name} has non-finite entries")
    return a


def _fix_column_signs(u: np.ndarray, *coupled: np.ndarray) -> None:
    # Make the largest-magnitude entry of each column of `u` positive,
    # flipping the same columns of any coupled factor to preserve products.
    for j in range(u.shape[1]):
        k = int(np.argmax(np.abs(u[:, j])))
        if u[k, j] < 0:
            u[:, j] = -u[:, j]
            for c in coupled:
                c[:, j] = -c[:, j]


def sym_eig(a) -> SymEig:
    """Eigendecomposition of a symmetric matrix with a fixed sign convention.

    Raises ShapeError for non-square input or asymmetry beyond 1e-8 relative.
    """
    a = _as_f64_matrix(a)
    n, m = a.shape
    if n != m:
        raise ShapeError(f"expected square matrix, got {n}x{m}")
    scale = max(1.0, float(np.linalg.norm(a)))
    if np.linalg.norm(a - a.T) > 1e-8 * scale:
        raise ShapeError("matrix is not symmetric to 1e-8 relative")
    sym = (a + a.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    vecs = np.ascontiguousarray(vecs)
    _fix_column_signs(vecs)
    return SymEig(vals, vecs)


def svd(g) -> SvdResult:
    """Reduced SVD with the same largest-entry sign convention as sym_eig.

    U-column signs are fixed; the paired V column flips with them so that
    u_i sigma_i v_i^T is unchanged.
    """
    g = _as_f64_matrix(g)
    u, s, vt = np.linalg.svd(g, full_matrices=False)
    u = np.ascontiguousarray(u)
    v = np.ascontiguousarray(vt.T)
    _fix_column_signs(u, v)
    return SvdResult(u, s, v)


def psd_power(a, p: float, damp: float = 0.0) -> np.ndarray:
    """V (max(L,0) + damp I)^p V^T for symmetric `a` with eigenvalues L.

    Eigenvalues are clamped at zero before damping so fractional powers of
    noisy PSD estimates stay real. Negative powers with a zero (post-clamp,
    post-damp) eigenvalue raise SingularMatrixError.
    """
    if damp < 0:
        raise ValueError("damp must be nonnegative")
    vals, vecs = sym_eig(a)
    vals = np.maximum(vals, 0.0) + damp
    if p < 0 and np.any(vals == 0.0):
        raise SingularMatrixError(
            f"matrix power {p} undefined: zero eigenvalue with damp={damp}"
        )
    powered = vals**p
    return (vecs * powered) @ vecs.T


def newton_schulz_msign(m, steps: int = NS_STEPS, coeffs=NS_COEFFS) -> np.ndarray:
    """Approximate the matrix sign (polar factor) U V^T by a quintic iteration.

    The iterate is Frobenius-normalized, transposed when rows exceed columns
    so the Gram matrix is the smaller of the two, and mapped through
    X <- aX + (b XX^T + c (XX^T)^2) X. The result approximates the projection
    onto semi-orthogonal matrices; singular values land near (not exactly at)
    one, which is why callers compare against a calibrated tolerance.

    A zero matrix returns a zero matrix of the same shape: a zero gradient is
    a legitimate training event, not an error.
    """
    m = _as_f64_matrix(m)
    a, b, c = coeffs
    norm = float(np.linalg.norm(m))
    if norm == 0.0:
        return np.zeros_like(m)
    x = m / norm
    transposed = x.shape[0] > x.shape[1]
    if transposed:
        x = x.T
    for _ in range(steps):
        gram = x @ x.T
        poly = b * gram + c * (gram @ gram)
        x = a * x + poly @ x
    if transposed:
        x = x.T
    return x


def qr_orthonormal(m) -> np.ndarray:
    """Orthonormal basis Q of span(M) for an n x d matrix with n >= d.

    Signs are fixed by forcing the diagonal of the triangular factor
    positive. Near-zero diagonal entries signal rank deficiency and raise
    DegenerateInputError.
    """
    m = _as_f64_matrix(m)
    n, d = m.shape
    if n < d:
        raise ShapeError(f"need rows >= cols for orthonormalization, got {n}x{d}")
    q, r = np.linalg.qr(m, mode="reduced")
    diag = np.diag(r)
    tol = max(n, d) * np.finfo(np.float64).eps * float(np.max(np.abs(diag), initial=0.0))
    if np.any(np.abs(diag) <= tol):
        raise DegenerateInputError("input is numerically rank-deficient")
    signs = np.where(diag < 0, -1.0, 1.0)
    return np.ascontiguousarray(q * signs)
