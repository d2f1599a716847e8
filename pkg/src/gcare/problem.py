"""LQ problem data, the standing-assumption check, and derived quantities."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotPSD, NotSymmetric
from .matlin import (
    DEFAULT_RANK_TOL,
    as_matrix,
    image_basis,
    is_psd,
    kernel_basis,
    pseudo_inverse,
)

__all__ = [
    "ProblemData",
    "ValidationReport",
    "DerivedData",
    "XDerived",
    "validate",
    "derive",
    "output_factorization",
    "x_derived",
]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ProblemData:
    """The weights and dynamics ``(A, B, Q, S, R)`` of an LQ problem.

    Cost integrand is ``[x; u]^T Pi [x; u]`` with ``Pi = [[Q, S], [S^T, R]]``
    and dynamics ``x' = A x + B u``. Dimensions are checked on construction;
    the PSD assumption on ``Pi`` is checked by :func:`validate`.
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for name in "ABQSR":
            object.__setattr__(self, name, _frozen(as_matrix(getattr(self, name), name)))
        n = self.A.shape[0]
        m = self.B.shape[1]
        expected = {"A": (n, n), "B": (n, m), "Q": (n, n), "S": (n, m), "R": (m, m)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionMismatch(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape} "
                    f"for n={n}, m={m}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def Pi(self):
        return np.block([[self.Q, self.S], [self.S.T, self.R]])

    def same_as(self, other, atol=0.0):
        return all(np.allclose(getattr(self, k), getattr(other, k), rtol=0.0, atol=atol)
                   for k in "ABQSR")


@dataclass
class ValidationReport:
    pi_psd: bool
    pi_min_eig: float
    symmetry_defects: dict
    kernel_containment: bool
    kernel_containment_defect: float
    messages: list = field(default_factory=list)

    @property
    def ok(self):
        return self.pi_psd and self.kernel_containment

    def as_dict(self):
        return {
            "ok": self.ok,
            "pi_psd": self.pi_psd,
            "pi_min_eig": self.pi_min_eig,
            "symmetry_defects": dict(self.symmetry_defects),
            "kernel_containment": self.kernel_containment,
            "kernel_containment_defect": self.kernel_containment_defect,
            "messages": list(self.messages),
        }


def validate(sigma, tol=1e-10, rank_tol=DEFAULT_RANK_TOL):
    """Check the standing assumption ``Pi = Pi^T >= 0`` and ``ker R ⊆ ker S``.

    Failures are reported, never raised; the caller decides what to do.
    """
    Pi = sigma.Pi
    scale = max(1.0, float(np.linalg.norm(Pi, 2)))
    defects = {
        "Q": float(np.max(np.abs(sigma.Q - sigma.Q.T))),
        "R": float(np.max(np.abs(sigma.R - sigma.R.T))),
    }
    messages = []
    for name, d in defects.items():
        if d > tol * scale:
            messages.append(f"{name} is not symmetric (max defect {d:.3e})")
    min_eig = float(np.linalg.eigvalsh(0.5 * (Pi + Pi.T))[0])
    # an asymmetric Q or R makes Pi asymmetric, which already breaks Pi = Pi^T >= 0
    psd = min_eig >= -tol * scale and not messages
    if min_eig < -tol * scale:
        messages.append(
            f"Π not positive semidefinite (smallest eigenvalue {min_eig:.6g})")
    N = kernel_basis(0.5 * (sigma.R + sigma.R.T), rank_tol).basis
    contain_defect = float(np.linalg.norm(sigma.S @ N, 2)) if N.shape[1] else 0.0
    contained = contain_defect <= tol * scale
    if not contained:
        messages.append(
            f"ker R is not contained in ker S (||S N|| = {contain_defect:.3e})")
    return ValidationReport(psd, min_eig, defects, contained, contain_defect, messages)


@dataclass(frozen=True, eq=False)
class DerivedData:
    """Quantities computed once from the problem data.

    ``T1``/``T2`` are orthonormal bases of ``im R`` and ``ker R``; ``G`` is the
    orthogonal projector on ``ker R``. ``F``/``A0`` and ``Lam``/``Q0`` are the
    same matrices under both names. ``C``, ``D`` factor ``Pi`` and ``C0`` is
    ``C - D R^+ S^T``.
    """

    Rp: np.ndarray
    G: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    F: np.ndarray
    Lam: np.ndarray
    C: np.ndarray
    D: np.ndarray
    C0: np.ndarray
    rank_R: int
    rank_Pi: int

    @property
    def A0(self):
        return self.F

    @property
    def Q0(self):
        return self.Lam


def output_factorization(Pi, n, tol=DEFAULT_RANK_TOL, psd_tol=1e-10):
    """Return ``(C, D)`` with ``[C D]^T [C D] = Pi``; ``C`` takes the first ``n`` columns.

    Rows are ``sqrt(w_i) v_i^T`` for the eigenpairs of ``Pi`` above the rank
    cutoff, so ``p = rank Pi``.
    """
    Pi = as_matrix(Pi, "Pi")
    if not is_psd(Pi, psd_tol):
        raise NotPSD("Pi is not positive semidefinite")
    if not 0 <= n <= Pi.shape[0]:
        raise DimensionMismatch(f"cannot split a {Pi.shape} matrix at n={n}")
    w, V = np.linalg.eigh(0.5 * (Pi + Pi.T))
    w, V = w[::-1], V[:, ::-1]
    wmax = max(w[0], 0.0) if w.size else 0.0
    keep = w > tol.cutoff(wmax)
    W = np.sqrt(w[keep])[:, None] * V[:, keep].T
    return W[:, :n], W[:, n:]


def derive(sigma, tol=DEFAULT_RANK_TOL):
    """Compute :class:`DerivedData`; assumes :func:`validate` passed."""
    Rs = 0.5 * (sigma.R + sigma.R.T)
    Rp = pseudo_inverse(Rs, tol)
    Rp = 0.5 * (Rp + Rp.T)
    T1 = image_basis(Rs, tol).basis
    T2 = kernel_basis(Rs, tol).basis
    G = T2 @ T2.T
    F = sigma.A - sigma.B @ Rp @ sigma.S.T
    Lam = sigma.Q - sigma.S @ Rp @ sigma.S.T
    Lam = 0.5 * (Lam + Lam.T)
    C, D = output_factorization(sigma.Pi, sigma.n, tol)
    C0 = C - D @ Rp @ sigma.S.T
    return DerivedData(
        Rp=_frozen(Rp), G=_frozen(G), T1=_frozen(T1), T2=_frozen(T2),
        B1=_frozen(sigma.B @ T1), B2=_frozen(sigma.B @ T2),
        F=_frozen(F), Lam=_frozen(Lam), C=_frozen(C), D=_frozen(D), C0=_frozen(C0),
        rank_R=T1.shape[1], rank_Pi=C.shape[0],
    )


@dataclass(frozen=True, eq=False)
class XDerived:
    Q_X: np.ndarray
    S_X: np.ndarray
    K_X: np.ndarray
    A_X: np.ndarray
    Pi_X: np.ndarray


def check_symmetric(X, name="X", tol=1e-9):
    X = as_matrix(X, name)
    if X.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {X.shape}")
    scale = max(1.0, float(np.max(np.abs(X)))) if X.size else 1.0
    if X.size and np.max(np.abs(X - X.T)) > tol * scale:
        raise NotSymmetric(f"{name} is not symmetric")
    return X


def x_derived(sigma, X, tol=DEFAULT_RANK_TOL):
    """``Q_X, S_X, K_X = R^+ S_X^T, A_X = A - B K_X`` and ``Pi_X`` for symmetric X."""
    X = check_symmetric(X)
    if X.shape != sigma.A.shape:
        raise DimensionMismatch(f"X has shape {X.shape}, expected {sigma.A.shape}")
    Rp = pseudo_inverse(sigma.R, tol)
    Q_X = sigma.Q + sigma.A.T @ X + X @ sigma.A
    S_X = sigma.S + X @ sigma.B
    K_X = Rp @ S_X.T
    A_X = sigma.A - sigma.B @ K_X
    Pi_X = np.block([[Q_X, S_X], [S_X.T, sigma.R]])
    return XDerived(Q_X, S_X, K_X, A_X, Pi_X)


def summary(sigma, derived):
    return {
        "n": sigma.n,
        "m": sigma.m,
        "rank_R": derived.rank_R,
        "rank_Pi": derived.rank_Pi,
        "dim_ker_R": sigma.m - derived.rank_R,
    }

