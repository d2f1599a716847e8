"""Rank-revealing linear algebra: pseudo-inverses, projectors, PSD tests and
subspace algebra on orthonormal bases.

Every rank decision goes through :class:`RankTolerance`; singular values at
or below ``max(relative * sigma_max, absolute)`` are treated as zero.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidMatrix, NotPSD

__all__ = [
    "RankTolerance",
    "Subspace",
    "as_matrix",
    "pseudo_inverse",
    "kernel_projector",
    "image_basis",
    "kernel_basis",
    "is_psd",
    "psd_sqrt",
    "numerical_rank",
    "subspace_contains",
    "subspace_equal",
    "subspace_sum",
    "subspace_intersect",
    "orthogonal_complement",
    "image_of",
    "zero_subspace",
    "full_space",
]


@dataclass(frozen=True)
class RankTolerance:
    relative: float = 1e-10
    absolute: float = 1e-12

    def __post_init__(self):
        if not (self.relative > 0 and self.absolute > 0):
            raise ValueError("rank tolerances must be strictly positive")

    def cutoff(self, smax):
        return max(self.relative * float(smax), self.absolute)


DEFAULT_RANK_TOL = RankTolerance()


def as_matrix(M, name="matrix"):
    """Coerce to a finite float64 2-D array; raise :class:`InvalidMatrix` otherwise."""
    try:
        arr = np.array(M, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidMatrix(f"{name} is not a real array: {exc}") from None
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise InvalidMatrix(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    return arr


def _svd(M):
    if M.size == 0:
        r, c = M.shape
        return np.zeros((r, 0)), np.zeros(0), np.zeros((0, c))
    return np.linalg.svd(M, full_matrices=False)


def numerical_rank(M, tol=DEFAULT_RANK_TOL):
    M = as_matrix(M)
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol.cutoff(s[0])))


def pseudo_inverse(M, tol=DEFAULT_RANK_TOL):
    """Moore-Penrose pseudo-inverse with an explicit rank cutoff."""
    M = as_matrix(M)
    U, s, Vt = _svd(M)
    if s.size == 0:
        return np.zeros(M.T.shape)
    keep = s > tol.cutoff(s[0])
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


@dataclass(frozen=True, eq=False)
class Subspace:
    """A subspace of R^n stored by an orthonormal basis (``n x dim``).

    The trivial subspace has a basis with zero columns.
    """

    basis: np.ndarray
    tol: RankTolerance = field(default=DEFAULT_RANK_TOL)

    def __post_init__(self):
        b = np.array(self.basis, dtype=float)
        if b.ndim != 2:
            raise InvalidMatrix("subspace basis must be 2-D")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def ambient_dim(self):
        return self.basis.shape[0]

    @property
    def dim(self):
        return self.basis.shape[1]

    @property
    def projector(self):
        return self.basis @ self.basis.T

    def orthonormality_defect(self):
        if self.dim == 0:
            return 0.0
        return float(np.max(np.abs(self.basis.T @ self.basis - np.eye(self.dim))))

    def __repr__(self):
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim})"


def zero_subspace(n, tol=DEFAULT_RANK_TOL):
    return Subspace(np.zeros((n, 0)), tol)


def full_space(n, tol=DEFAULT_RANK_TOL):
    return Subspace(np.eye(n), tol)


def image_basis(M, tol=DEFAULT_RANK_TOL):
    """Orthonormal basis of ``im M`` (left singular vectors above the cutoff)."""
    M = as_matrix(M)
    U, s, _ = _svd(M)
    if s.size == 0:
        return zero_subspace(M.shape[0], tol)
    r = int(np.sum(s > tol.cutoff(s[0])))
    return Subspace(U[:, :r], tol)


def kernel_basis(M, tol=DEFAULT_RANK_TOL):
    """Orthonormal basis of ``ker M``; its dimension is ``cols - rank``."""
    M = as_matrix(M)
    rows, cols = M.shape
    if M.size == 0:
        return full_space(cols, tol)
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    r = int(np.sum(s > tol.cutoff(s[0])))
    return Subspace(Vt[r:].T, tol)


def kernel_projector(R, tol=DEFAULT_RANK_TOL):
    """Orthogonal projector onto ``ker R`` (equals ``I - R^+ R``)."""
    R = as_matrix(R, "R")
    if R.shape[0] != R.shape[1]:
        raise DimensionMismatch(f"kernel_projector needs a square matrix, got {R.shape}")
    N = kernel_basis(R, tol).basis
    return N @ N.T


def _psd_scale(M):
    return max(1.0, float(np.linalg.norm(M, 2))) if M.size else 1.0


def is_psd(M, tol=1e-10):
    """True iff ``M`` is symmetric and its smallest eigenvalue is >= -tol * scale.

    ``scale`` is ``max(1, ||M||_2)``.
    """
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"is_psd needs a square matrix, got {M.shape}")
    if M.size == 0:
        return True
    scale = _psd_scale(M)
    if np.max(np.abs(M - M.T)) > tol * scale:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (M + M.T))[0] >= -tol * scale)


def psd_sqrt(M, tol=1e-10):
    """Symmetric PSD square root via the eigendecomposition."""
    M = as_matrix(M)
    if not is_psd(M, tol):
        raise NotPSD("psd_sqrt: matrix is not positive semidefinite")
    if M.size == 0:
        return M.copy()
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    N = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    return 0.5 * (N + N.T)


def _check_ambient(A, B):
    if A.ambient_dim != B.ambient_dim:
        raise DimensionMismatch(
            f"subspaces live in R^{A.ambient_dim} and R^{B.ambient_dim}")


def subspace_contains(A, B, tol=1e-8):
    """True iff ``B`` is contained in ``A``.

    Decided by the sine of the largest principal angle between ``B`` and its
    projection on ``A``.
    """
    _check_ambient(A, B)
    if B.dim == 0:
        return True
    if B.dim > A.dim:
        return False
    residual = B.basis - A.basis @ (A.basis.T @ B.basis)
    return bool(np.linalg.norm(residual, 2) <= tol)


def subspace_equal(A, B, tol=1e-8):
    return A.dim == B.dim and subspace_contains(A, B, tol) and subspace_contains(B, A, tol)


def subspace_sum(A, B, tol=None):
    _check_ambient(A, B)
    return image_basis(np.hstack([A.basis, B.basis]), tol or A.tol)


def orthogonal_complement(A, tol=None):
    tol = tol or A.tol
    if A.dim == 0:
        return full_space(A.ambient_dim, tol)
    return kernel_basis(A.basis.T, tol)


def subspace_intersect(A, B, tol=None):
    """``A ∩ B`` as the kernel of the stacked complementary projectors."""
    _check_ambient(A, B)
    tol = tol or A.tol
    n = A.ambient_dim
    if A.dim == 0 or B.dim == 0:
        return zero_subspace(n, tol)
    eye = np.eye(n)
    stacked = np.vstack([eye - A.projector, eye - B.projector])
    return kernel_basis(stacked, tol)


def image_of(M, A, tol=None):
    """``M A`` for a subspace ``A``."""
    M = as_matrix(M)
    if M.shape[1] != A.ambient_dim:
        raise DimensionMismatch(f"cannot map R^{A.ambient_dim} by a {M.shape} matrix")
    return image_basis(M @ A.basis, tol or A.tol)
