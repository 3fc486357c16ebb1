"""Sparse and dense linear-algebra kernels used by the solver stack.

Sparse matrices are scipy CSR throughout; helpers here pin down the canonical
form (sorted column indices, duplicates summed) and provide the smoother
sweeps, the Galerkin triple product and a generalized eigensolver that handles
the singular pencils arising from boundary-penalty estimates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular


class NotSPDError(Exception):
    """Cholesky hit a non-positive pivot: the operator lost positive
    definiteness, typically because the boundary penalty is too small."""


class DegeneratePencilError(Exception):
    """The reduced pencil has a direction with zero M-energy but nonzero
    K-energy, so the stabilization constant is unbounded."""


@dataclass
class GeneralizedEigResult:
    """Largest finite eigenvalue of a symmetric pencil K v = lam M v.

    Attributes
    ----------
    value : float
        Largest eigenvalue of the pencil restricted to the complement of the
        common nullspace of K and M.
    deflated_dim : int
        Dimension of the common nullspace that was projected out.
    """

    value: float
    deflated_dim: int


def canonical_csr(matrix) -> sp.csr_matrix:
    """Return `matrix` as CSR in canonical form.

    Duplicate entries are summed (COO accumulation semantics) and column
    indices are sorted within each row.
    """
    a = sp.csr_matrix(matrix)
    a.sum_duplicates()
    a.sort_indices()
    return a


def spmv(A: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    """Sparse matrix-vector product y = A x."""
    return A @ x


def _mask_to_indices(n: int, mask) -> np.ndarray:
    """Normalize an optional boolean mask / index array to sorted indices."""
    if mask is None:
        return np.arange(n)
    mask = np.asarray(mask)
    if mask.dtype == bool:
        return np.flatnonzero(mask)
    return np.unique(mask)


def gauss_seidel_sweep(A: sp.csr_matrix, F: np.ndarray, u: np.ndarray,
                       mask=None) -> np.ndarray:
    """One forward Gauss-Seidel sweep, in place, over the masked rows.

    Rows are visited in ascending global index order; entries outside the
    mask are left untouched.  Equivalent to the classical update
    u_i <- (F_i - sum_{j<i} a_ij u_j_new - sum_{j>i} a_ij u_j_old) / a_ii,
    implemented as a lower-triangular solve for the masked correction:
    (D + L)|_mask  delta = (F - A u)|_mask.

    Parameters
    ----------
    A : csr_matrix
        System matrix with nonzero diagonal on every swept row.
    F : ndarray
        Right-hand side.
    u : ndarray
        Iterate, updated in place.
    mask : ndarray or None
        Boolean mask or index array selecting the rows to sweep.  None sweeps
        every row; an empty mask is a no-op.

    Returns
    -------
    ndarray
        The updated iterate (same array as `u`).
    """
    idx = _mask_to_indices(A.shape[0], mask)
    if idx.size == 0:
        return u
    r = F - A @ u
    if idx.size == A.shape[0]:
        sub = A
        r_sub = r
    else:
        sub = A[idx][:, idx]
        r_sub = r[idx]
    diag = sub.diagonal()
    if np.any(diag == 0.0):
        raise ZeroDivisionError("Gauss-Seidel sweep over a row with zero diagonal")
    lower = sp.tril(sub, format="csr")
    delta = spsolve_triangular(lower, r_sub, lower=True)
    u[idx] += delta
    return u


def weighted_jacobi_sweep(A: sp.csr_matrix, F: np.ndarray, u: np.ndarray,
                          omega: float) -> np.ndarray:
    """One damped Jacobi step u <- u + omega * D^{-1} (F - A u), in place.

    omega = 1 is plain Jacobi; omega = 2/3 is the classical damping that
    makes the sweep a smoother for second-order elliptic operators.
    """
    diag = A.diagonal()
    if np.any(diag == 0.0):
        raise ZeroDivisionError("weighted Jacobi with a zero diagonal entry")
    u += omega * (F - A @ u) / diag
    return u


def rap_product(R: sp.csr_matrix, A: sp.csr_matrix, P: sp.csr_matrix) -> sp.csr_matrix:
    """Galerkin triple product R A P as canonical CSR."""
    coarse = R @ A @ P
    return canonical_csr(coarse)


def dense_solve_spd(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A x = b for dense symmetric positive definite A via Cholesky.

    Raises
    ------
    NotSPDError
        If a non-positive pivot is met, which for the assembled systems here
        diagnoses a stabilization parameter below the coercivity threshold.
    """
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError(
            f"Cholesky failed ({exc}); matrix is not positive definite. "
            "For Nitsche systems this usually means lambda is below the "
            "coercivity constant."
        ) from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def generalized_eig_max(K: np.ndarray, M: np.ndarray,
                        rtol: float = 1e-12) -> GeneralizedEigResult:
    """Largest finite eigenvalue of the symmetric pencil K v = lam M v.

    Both K and M may be singular.  The common nullspace (directions with zero
    energy in both forms) is removed first; on the complement M must be
    positive definite, which holds for the boundary-penalty pencils where M is
    an interior Dirichlet form.  Directions with zero M-energy but nonzero
    K-energy make the pencil unbounded and raise.

    The common nullspace is detected from a symmetric eigendecomposition of
    the scale-normalized sum K/|K|_max + M/|M|_max with relative threshold
    `rtol` (for PSD forms, the sum vanishes exactly on the intersection of
    the nullspaces).

    Parameters
    ----------
    K, M : ndarray
        Symmetric positive semidefinite matrices of equal shape.
    rtol : float
        Relative threshold for rank decisions, scaled by the largest
        eigenvalue magnitude of the matrix being examined.

    Returns
    -------
    GeneralizedEigResult
        Largest finite eigenvalue and the deflated dimension.
    """
    K = np.asarray(K, dtype=float)
    M = np.asarray(M, dtype=float)
    if K.shape != M.shape or K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("K and M must be square matrices of equal shape")
    n = K.shape[0]
    s_k = float(np.abs(K).max(initial=0.0))
    s_m = float(np.abs(M).max(initial=0.0))
    if s_k == 0.0 and s_m == 0.0:
        return GeneralizedEigResult(0.0, n)
    S = np.zeros_like(K)
    if s_k > 0.0:
        S += K / s_k
    if s_m > 0.0:
        S += M / s_m
    w, V = np.linalg.eigh(S)
    keep = w > rtol * w[-1]
    deflated = int(n - np.count_nonzero(keep))
    if not np.any(keep):
        return GeneralizedEigResult(0.0, n)
    Vk = V[:, keep]
    Kr = Vk.T @ K @ Vk
    Mr = Vk.T @ M @ Vk
    wm, Um = np.linalg.eigh(Mr)
    null_m = wm <= rtol * max(wm[-1], 0.0)
    if np.any(null_m):
        # Residual M-null directions: admissible only if K also vanishes
        # there, otherwise the Rayleigh quotient is unbounded.
        U0 = Um[:, null_m]
        if np.abs(Kr @ U0).max(initial=0.0) > rtol * max(s_k, 1.0):
            raise DegeneratePencilError(
                "pencil has a direction with zero M-energy and nonzero "
                "K-energy; the stabilization constant is unbounded"
            )
        U1 = Um[:, ~null_m]
        Kr = U1.T @ Kr @ U1
        Mr = U1.T @ Mr @ U1
        deflated += int(np.count_nonzero(null_m))
        if Kr.size == 0:
            return GeneralizedEigResult(0.0, deflated)
    lam = scipy.linalg.eigh(Kr, Mr, eigvals_only=True, check_finite=False)
    return GeneralizedEigResult(float(lam[-1]), deflated)
