"""Geometric control subspaces of a quadruple ``(A, B, C, D)``.

* reachable subspace ``R(M, N)``: smallest M-invariant subspace containing im N
* ``V*``: largest output-nulling subspace
* ``S*``: smallest input-containing subspace
* ``R* = V* ∩ S*``: largest output-nulling reachability subspace

Each recursion re-orthonormalises its iterate and stops when the dimension
stagnates and the subspace no longer moves (at most ``n + 1`` iterations).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .matlin import (
    DEFAULT_RANK_TOL,
    Subspace,
    as_matrix,
    full_space,
    image_basis,
    kernel_basis,
    subspace_contains,
    subspace_equal,
    subspace_intersect,
    subspace_sum,
    zero_subspace,
)
from .problem import derive

__all__ = [
    "Quadruple",
    "GeometryReport",
    "reachable_subspace",
    "largest_output_nulling",
    "smallest_input_containing",
    "largest_reachability",
    "geometry_report",
]


@dataclass(frozen=True, eq=False)
class Quadruple:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for name in "ABCD":
            object.__setattr__(self, name, as_matrix(getattr(self, name), name))
        n, m, p = self.A.shape[0], self.B.shape[1], self.C.shape[0]
        ok = (self.A.shape == (n, n) and self.B.shape == (n, m)
              and self.C.shape == (p, n) and self.D.shape == (p, m))
        if not ok:
            raise DimensionMismatch(
                f"inconsistent quadruple shapes A{self.A.shape} B{self.B.shape} "
                f"C{self.C.shape} D{self.D.shape}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


def reachable_subspace(M, N, tol=DEFAULT_RANK_TOL):
    """``im [N, MN, ..., M^(n-1) N]`` by iterated image sums."""
    M = as_matrix(M, "M")
    N = np.asarray(N, dtype=float)
    n = M.shape[0]
    if N.ndim == 1:
        N = N.reshape(n, -1) if N.size else np.zeros((n, 0))
    if M.shape != (n, n) or N.shape[0] != n:
        raise DimensionMismatch(f"reachable_subspace: M{M.shape}, N{N.shape}")
    V = image_basis(N, tol) if N.shape[1] else zero_subspace(n, tol)
    for _ in range(n + 1):
        if V.dim == 0 or V.dim == n:
            break
        W = subspace_sum(V, image_basis(M @ V.basis, tol), tol)
        if W.dim == V.dim:
            break
        V = W
    return V


def _require_quadruple(q):
    if not isinstance(q, Quadruple):
        raise TypeError("expected a Quadruple")


def largest_output_nulling(q, tol=DEFAULT_RANK_TOL, max_iter=None):
    """``V*`` as the limit of the non-increasing recursion

    ``V_0 = R^n``, ``V_{k+1} = V_k ∩ {x : [A; C] x ∈ (V_k × 0) + im [B; D]}``.
    """
    _require_quadruple(q)
    n, p = q.n, q.C.shape[0]
    V = full_space(n, tol)
    AC = np.vstack([q.A, q.C])
    BD = np.vstack([q.B, q.D])
    for _ in range(max_iter or n + 1):
        lifted = np.vstack([V.basis, np.zeros((p, V.dim))])
        W = image_basis(np.hstack([lifted, BD]), tol)
        # x is admissible iff [A; C] x has no component outside W
        perp = np.eye(n + p) - W.basis @ W.basis.T
        pre = kernel_basis(perp @ AC, tol)
        V_next = subspace_intersect(V, pre, tol)
        if V_next.dim == V.dim:
            return V_next
        V = V_next
    return V


def smallest_input_containing(q, tol=DEFAULT_RANK_TOL, max_iter=None):
    """``S*`` as the limit of the non-decreasing recursion

    ``S_0 = 0``, ``S_{k+1} = [A B] ((S_k × R^m) ∩ ker [C D])``.
    """
    _require_quadruple(q)
    n, m = q.n, q.m
    S = zero_subspace(n, tol)
    CD = np.hstack([q.C, q.D])
    AB = np.hstack([q.A, q.B])
    for _ in range(max_iter or n + 1):
        # basis of S_k × R^m in R^(n+m)
        W = np.zeros((n + m, S.dim + m))
        W[:n, :S.dim] = S.basis
        W[n:, S.dim:] = np.eye(m)
        if CD.shape[0]:
            Z = W @ kernel_basis(CD @ W, tol).basis
        else:
            Z = W
        S_next = image_basis(AB @ Z, tol) if Z.shape[1] else zero_subspace(n, tol)
        # the recursion is monotone; absorb round-off by summing
        S_next = subspace_sum(S, S_next, tol)
        if S_next.dim == S.dim:
            return S_next
        S = S_next
    return S


def largest_reachability(q, tol=DEFAULT_RANK_TOL):
    """``R* = V* ∩ S*``."""
    return subspace_intersect(
        largest_output_nulling(q, tol), smallest_input_containing(q, tol), tol)


@dataclass(frozen=True, eq=False)
class GeometryReport:
    Vstar: Subspace
    Rstar: Subspace
    Sstar: Subspace
    R_F_B2: Subspace
    R_A0_BG: Subspace
    identity_SR: bool
    crosscheck_R: bool
    Rstar_in_Vstar: bool
    feedback_invariant: bool = True

    def as_dict(self):
        return {
            "dim_Vstar": self.Vstar.dim,
            "dim_Rstar": self.Rstar.dim,
            "dim_Sstar": self.Sstar.dim,
            "dim_R_F_B2": self.R_F_B2.dim,
            "dim_R_A0_BG": self.R_A0_BG.dim,
            "identity_SR": self.identity_SR,
            "crosscheck_R": self.crosscheck_R,
            "Rstar_in_Vstar": self.Rstar_in_Vstar,
            "feedback_invariant": self.feedback_invariant,
        }


def geometry_report(sigma, tol=DEFAULT_RANK_TOL, angle_tol=1e-7):
    """All subspaces for the quadruple ``(A, B, C, D)`` with ``Pi = [C D]^T [C D]``.

    ``identity_SR`` tests ``S* = R*``; ``crosscheck_R`` tests ``R* = R(A0, B G)``;
    ``feedback_invariant`` tests that ``V*``, ``S*`` and ``R*`` are unchanged for
    the quadruple ``(A0, B, C0, D)``.
    """
    d = derive(sigma, tol)
    q = Quadruple(sigma.A, sigma.B, d.C, d.D)
    Vs = largest_output_nulling(q, tol)
    Ss = smallest_input_containing(q, tol)
    Rs = subspace_intersect(Vs, Ss, tol)
    q0 = Quadruple(d.A0, sigma.B, d.C0, d.D)
    Vs0 = largest_output_nulling(q0, tol)
    Ss0 = smallest_input_containing(q0, tol)
    invariant = (subspace_equal(Vs, Vs0, angle_tol) and subspace_equal(Ss, Ss0, angle_tol)
                 and subspace_equal(Rs, subspace_intersect(Vs0, Ss0, tol), angle_tol))
    rfb2 = reachable_subspace(d.F, d.B2, tol)
    ra0 = reachable_subspace(d.A0, sigma.B @ d.G, tol)
    return GeometryReport(
        Vstar=Vs, Rstar=Rs, Sstar=Ss, R_F_B2=rfb2, R_A0_BG=ra0,
        identity_SR=subspace_equal(Ss, Rs, angle_tol),
        crosscheck_R=subspace_equal(Rs, ra0, angle_tol),
        Rstar_in_Vstar=subspace_contains(Vs, Rs, angle_tol),
        feedback_invariant=invariant,
    )
