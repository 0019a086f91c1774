"""Sparse and dense linear-algebra kernels used throughout the package.

Conventions
-----------
Sparse matrices are ``scipy.sparse.csr_matrix`` instances kept in canonical
form: sorted column indices within each row, duplicates summed, no explicitly
stored zeros.  Dense matrices and vectors are ``numpy.ndarray``.  All inputs
are treated as immutable; every public function is re-entrant and a
:class:`Factorization` may be shared read-only between threads.

The direct solver is SuperLU with a fill-reducing column ordering.  Dense
eigen/SVD routines are reserved for desk-scale diagnostics; callers enforce
size guards.  Pseudo-inverses of singular mass matrices are never formed:
:func:`restricted_spd_solve` applies them as an operator on the SPD support
block.
"""

from __future__ import annotations

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InconsistentRhsError, SingularMatrixError

DEFAULT_PIVOT_RTOL = 1e-14
DEFAULT_RHS_RTOL = 1e-12


def canonical_csr(a) -> sp.csr_matrix:
    """Return ``a`` as a canonical CSR matrix (sorted, deduplicated, no stored zeros)."""
    m = sp.csr_matrix(a, copy=True)
    m.sum_duplicates()
    m.sort_indices()
    m.eliminate_zeros()
    return m


def validate_csr(a: sp.csr_matrix) -> None:
    """Check the CSR structural invariants, raising ``ValueError`` on violation."""
    if not sp.isspmatrix_csr(a):
        raise ValueError("expected a CSR matrix")
    n_rows, n_cols = a.shape
    if a.indptr.shape[0] != n_rows + 1:
        raise ValueError("row offset array has wrong length")
    if np.any(np.diff(a.indptr) < 0):
        raise ValueError("row offsets must be nondecreasing")
    if a.indices.size:
        if a.indices.min() < 0 or a.indices.max() >= n_cols:
            raise ValueError("column index out of bounds")
    for i in range(n_rows):
        cols = a.indices[a.indptr[i]:a.indptr[i + 1]]
        if cols.size > 1 and np.any(np.diff(cols) <= 0):
            raise ValueError(f"column indices not strictly increasing in row {i}")
    if a.data.size and np.any(a.data == 0.0):
        raise ValueError("explicitly stored zeros present")
    if a.data.size and not np.all(np.isfinite(a.data)):
        raise ValueError("non-finite matrix entries")


def max_abs(a) -> float:
    """Largest absolute entry of a sparse or dense matrix (0.0 if empty)."""
    if sp.issparse(a):
        return float(np.max(np.abs(a.data))) if a.data.size else 0.0
    arr = np.asarray(a)
    return float(np.max(np.abs(arr))) if arr.size else 0.0


class Factorization:
    """Reusable sparse LU factorization of a square matrix."""

    def __init__(self, lu, n: int, matrix_scale: float):
        self._lu = lu
        self.n = n
        self.matrix_scale = matrix_scale

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"rhs length {b.shape[0]} != {self.n}")
        return self._lu.solve(b)


def sparse_factorize(a, pivot_rtol: float = DEFAULT_PIVOT_RTOL) -> Factorization:
    """LU-factorize a square sparse matrix with partial pivoting.

    Raises :class:`SingularMatrixError` when a pivot falls below
    ``pivot_rtol * max|a|``, which signals a rank-deficient system.
    """
    m = canonical_csr(a)
    n_rows, n_cols = m.shape
    if n_rows != n_cols:
        raise ValueError("matrix must be square")
    scale = max_abs(m)
    if scale == 0.0:
        raise SingularMatrixError("zero matrix")
    try:
        lu = spla.splu(m.tocsc(), permc_spec="COLAMD")
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise SingularMatrixError(str(exc)) from exc
    pivots = np.abs(lu.U.diagonal())
    if pivots.size and pivots.min() < pivot_rtol * scale:
        raise SingularMatrixError(
            f"pivot {pivots.min():.3e} below {pivot_rtol:.1e} * max|A| = {pivot_rtol * scale:.3e}"
        )
    return Factorization(lu, n_rows, scale)


class RestrictedSpdSolver:
    """Apply the pseudo-inverse of a symmetric PSD matrix on its SPD support.

    The matrix restricted to ``support x support`` must be SPD; right-hand
    sides must vanish outside ``support``.  For such inputs the solve realizes
    ``pinv(M) @ b`` without ever forming the pseudo-inverse.
    """

    def __init__(self, m, support, sym_rtol: float = 1e-10):
        m = canonical_csr(m)
        n = m.shape[0]
        if m.shape[0] != m.shape[1]:
            raise ValueError("matrix must be square")
        scale = max_abs(m)
        asym = max_abs(m - m.T)
        if scale > 0.0 and asym > sym_rtol * scale:
            raise ValueError("matrix is not symmetric")
        support = np.unique(np.asarray(support, dtype=np.intp))
        if support.size == 0:
            raise ValueError("empty support")
        if support[0] < 0 or support[-1] >= n:
            raise ValueError("support index out of bounds")
        block = m[np.ix_(support, support)].tocsc()
        try:
            lu = spla.splu(
                block,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:
            raise SingularMatrixError(f"restricted block not SPD: {exc}") from exc
        diag_u = lu.U.diagonal()
        if np.any(diag_u <= 0.0):
            raise SingularMatrixError("restricted block not SPD (nonpositive pivot)")
        if not np.array_equal(lu.perm_r, lu.perm_c):
            # row pivoting kicked in; a symmetric factorization would not need it
            raise SingularMatrixError("restricted block not SPD (unsymmetric pivoting)")
        self.n = n
        self.support = support
        self._mask = np.zeros(n, dtype=bool)
        self._mask[support] = True
        self._lu = lu
        self._block = block

    def solve(self, b, rhs_rtol: float = DEFAULT_RHS_RTOL) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError("rhs length mismatch")
        b_norm = float(np.linalg.norm(b))
        outside = float(np.linalg.norm(b[~self._mask]))
        if outside > rhs_rtol * b_norm:
            raise InconsistentRhsError(
                f"rhs norm outside support {outside:.3e} exceeds {rhs_rtol:.1e} * ||b||"
            )
        y = np.zeros(self.n)
        y[self.support] = self._lu.solve(b[self.support])
        return y


def restricted_spd_solve(m, b, support, rhs_rtol: float = DEFAULT_RHS_RTOL) -> np.ndarray:
    """One-shot :class:`RestrictedSpdSolver` solve (factor once, use once)."""
    return RestrictedSpdSolver(m, support).solve(b, rhs_rtol=rhs_rtol)


def nullspace_basis(a, tol: float) -> np.ndarray:
    """Orthonormal basis of the numerical kernel of a symmetric matrix.

    Eigenvectors with ``|lambda| <= tol * max|lambda|`` span the returned
    columns; a full-rank matrix yields an ``(n, 0)`` array.  The all-zero
    matrix returns the identity basis.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entries")
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    scale = float(np.max(np.abs(a)))
    if scale > 0.0 and float(np.max(np.abs(a - a.T))) > 1e-8 * scale:
        raise ValueError("matrix is not symmetric")
    if scale == 0.0:
        return np.eye(n)
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    lam_max = float(np.max(np.abs(w)))
    keep = np.abs(w) <= tol * lam_max
    return np.ascontiguousarray(v[:, keep])


def rank(a, tol: float) -> int:
    """Numerical rank by counting singular values >= ``tol * sigma_max``."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    s_max = float(s[0]) if s.size else 0.0
    if s_max == 0.0:
        return 0
    return int(np.count_nonzero(s >= tol * s_max))


def write_matrix_market(path, a) -> None:
    """Dump a sparse matrix, dense matrix or vector in Matrix Market format."""
    if sp.issparse(a):
        scipy.io.mmwrite(str(path), a.tocoo())
        return
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    scipy.io.mmwrite(str(path), arr)


def read_matrix_market(path):
    """Read a Matrix Market file; coordinate data returns canonical CSR."""
    a = scipy.io.mmread(str(path))
    if sp.issparse(a):
        return canonical_csr(a)
    return np.asarray(a, dtype=float)
