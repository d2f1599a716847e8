"""Generalised Riccati equations: residuals, solution checks, flows and limits.

The algebraic equation (GCARE) is

    X A + A^T X - (S + X B) R^+ (S^T + B^T X) + Q = 0

and the constrained version (CGCARE) adds ``ker R ⊆ ker(S + X B)``.  The
differential equation (GRDE) is integrated backward from a terminal penalty
``P(T) = H`` or forward from ``X(0) = 0``; both run through the same adaptive
Dormand-Prince kernel in the reversed time variable.
"""

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import (
    DimensionMismatch,
    IntegrationDiverged,
    NoConvergence,
    NoStabilizingSolution,
    NotPSD,
    NotRegular,
    TerminalPenaltyNotReduced,
)
from .geometry import reachable_subspace
from .matlin import (
    DEFAULT_RANK_TOL,
    RankTolerance,
    as_matrix,
    is_psd,
    kernel_basis,
    orthogonal_complement,
    pseudo_inverse,
)
from .problem import check_symmetric, derive

__all__ = [
    "IntegrationSettings",
    "LimitSettings",
    "SolutionCandidate",
    "GRDETrajectory",
    "GrowthDiagnostic",
    "LimitResult",
    "PenaltyCertificate",
    "Ordering",
    "gcare_residual",
    "reduced_residual",
    "check_cgcare",
    "grde_backward",
    "grde_forward",
    "reduce_terminal_penalty",
    "care_limit_solution",
    "compare_psd",
    "regular_care_oracle",
]


@dataclass(frozen=True)
class IntegrationSettings:
    """Adaptive integrator controls (error test on the entrywise max-norm)."""

    rtol: float = 1e-10
    atol: float = 1e-12
    h0: float = 0.0  # 0 picks the initial step automatically
    h_min: float = 1e-14
    max_steps: int = 2_000_000
    ceiling: float = 1e8


@dataclass(frozen=True)
class LimitSettings:
    t_max: float = 1e3
    stat_tol: float = 1e-9  # relative: |dX/dt| <= stat_tol * (1 + |X|)
    res_tol: float = 1e-8  # relative to 1 + |Q| + 2|A||X| + |S + X B|^2 |R^+|
    window: int = 10
    n_record: int = 2001
    check_tol: float = 1e-7
    integration: IntegrationSettings = field(default_factory=IntegrationSettings)


def _pinv_R(sigma, tol):
    Rp = pseudo_inverse(0.5 * (sigma.R + sigma.R.T), tol)
    return 0.5 * (Rp + Rp.T)


def gcare_residual(sigma, X, tol=DEFAULT_RANK_TOL):
    """``X A + A^T X - (S + X B) R^+ (S^T + B^T X) + Q`` with no constraint applied."""
    X = check_symmetric(X)
    _check_square_like(sigma, X)
    SX = sigma.S + X @ sigma.B
    return X @ sigma.A + sigma.A.T @ X - SX @ _pinv_R(sigma, tol) @ SX.T + sigma.Q


def reduced_residual(sigma, X, tol=DEFAULT_RANK_TOL):
    """``X F + F^T X - X B R^+ B^T X + Lambda`` with ``F = A - B R^+ S^T``."""
    X = check_symmetric(X)
    _check_square_like(sigma, X)
    Rp = _pinv_R(sigma, tol)
    F = sigma.A - sigma.B @ Rp @ sigma.S.T
    Lam = sigma.Q - sigma.S @ Rp @ sigma.S.T
    XB = X @ sigma.B
    return X @ F + F.T @ X - XB @ Rp @ XB.T + Lam


def _check_square_like(sigma, X):
    if X.shape != (sigma.n, sigma.n):
        raise DimensionMismatch(f"X has shape {X.shape}, expected {(sigma.n, sigma.n)}")


@dataclass(frozen=True, eq=False)
class SolutionCandidate:
    """A symmetric matrix scored against CGCARE.

    ``is_solution`` requires both the residual and ``|(S + X B) G|`` to be at
    most ``tol * (1 + |X|_F)``. The remaining fields are structural checks that
    every genuine solution must pass.
    """

    X: np.ndarray
    gcare_residual_norm: float
    kernel_defect: float
    xb2_defect: float
    is_solution: bool
    ker_X_in_ker_Lambda: bool
    ker_X_Lambda_defect: float
    x_reach_defect: float
    lambda_reach_defect: float
    dim_reach: int
    tol: float

    def as_dict(self):
        return {
            "is_solution": self.is_solution,
            "gcare_residual_norm": self.gcare_residual_norm,
            "kernel_defect": self.kernel_defect,
            "xb2_defect": self.xb2_defect,
            "ker_X_in_ker_Lambda": self.ker_X_in_ker_Lambda,
            "ker_X_Lambda_defect": self.ker_X_Lambda_defect,
            "x_reach_defect": self.x_reach_defect,
            "lambda_reach_defect": self.lambda_reach_defect,
            "dim_reach_F_B2": self.dim_reach,
            "tol": self.tol,
        }


def check_cgcare(sigma, X, tol=1e-8, rank_tol=DEFAULT_RANK_TOL):
    """Score ``X`` as a CGCARE solution, with the structural diagnostics.

    The kernel of ``X`` is taken at the relative cutoff ``tol``; a vector in it
    can only be annihilated by ``Lambda`` up to ``O(sqrt(tol))``, which is the
    threshold used for ``ker X ⊆ ker Lambda``.
    """
    X = check_symmetric(X)
    _check_square_like(sigma, X)
    d = derive(sigma, rank_tol)
    scale = 1.0 + float(np.linalg.norm(X))
    res = gcare_residual(sigma, X, rank_tol)
    res_norm = float(np.linalg.norm(res))
    kernel_defect = float(np.linalg.norm((sigma.S + X @ sigma.B) @ d.G))
    xb2 = float(np.linalg.norm(X @ d.B2)) if d.B2.size else 0.0
    ok = res_norm <= tol * scale and kernel_defect <= tol * scale

    NX = kernel_basis(X, RankTolerance(max(tol, rank_tol.relative), rank_tol.absolute)).basis
    lam_scale = 1.0 + float(np.linalg.norm(d.Lam, 2))
    kx_defect = float(np.linalg.norm(d.Lam @ NX, 2)) if NX.shape[1] else 0.0
    reach = reachable_subspace(d.F, d.B2, rank_tol)
    if reach.dim:
        x_reach = float(np.linalg.norm(X @ reach.basis, 2))
        lam_reach = float(np.linalg.norm(d.Lam @ reach.basis, 2))
    else:
        x_reach = lam_reach = 0.0
    return SolutionCandidate(
        X=X, gcare_residual_norm=res_norm, kernel_defect=kernel_defect, xb2_defect=xb2,
        is_solution=bool(ok),
        ker_X_in_ker_Lambda=bool(kx_defect <= np.sqrt(tol) * lam_scale * scale),
        ker_X_Lambda_defect=kx_defect,
        x_reach_defect=x_reach, lambda_reach_defect=lam_reach,
        dim_reach=reach.dim, tol=tol,
    )


@dataclass(frozen=True, eq=False)
class GRDETrajectory:
    """Matrix flow sampled on an ascending time grid.

    For a backward flow ``values[k] = P_T(times[k])``; for a forward flow
    ``values[k] = X(times[k])``. ``kernel_defect[k] = |values[k] B G|_F``.
    ``increment_min_eig[k]`` is the smallest eigenvalue of the difference of
    consecutive samples taken in integration order (increasing ``T - t`` for a
    backward flow).
    """

    times: np.ndarray
    values: np.ndarray
    direction: str
    kernel_defect: np.ndarray
    increment_min_eig: np.ndarray
    status: str
    n_accepted: int
    n_rejected: int

    @property
    def horizon(self):
        return float(self.times[-1])

    @property
    def final(self):
        """Last value in integration order."""
        return self.values[0] if self.direction == "backward" else self.values[-1]

    def value_at(self, t):
        """Sample nearest to ``t``."""
        return self.values[int(np.argmin(np.abs(self.times - t)))]

    def summary(self):
        return {
            "direction": self.direction,
            "horizon": self.horizon,
            "n_samples": int(self.times.size),
            "status": self.status,
            "n_accepted": self.n_accepted,
            "n_rejected": self.n_rejected,
            "max_kernel_defect": float(np.max(self.kernel_defect)),
            "min_increment_eig": (float(np.min(self.increment_min_eig))
                                  if self.increment_min_eig.size else 0.0),
        }


def time_grid(t_end, grid=None):
    """Output grid on ``[0, t_end]``: ``None`` (201 points), a count, or explicit times."""
    t_end = float(t_end)
    if not t_end > 0:
        raise ValueError(f"horizon must be positive, got {t_end}")
    if grid is None:
        return np.linspace(0.0, t_end, 201)
    if np.isscalar(grid):
        k = int(grid)
        if k < 2:
            raise ValueError("a grid needs at least two points")
        return np.linspace(0.0, t_end, k)
    ts = np.asarray(grid, dtype=float).ravel()
    if ts.size == 0 or ts.min() < 0 or ts.max() > t_end * (1 + 1e-12):
        raise ValueError(f"grid times must lie in [0, {t_end}]")
    return np.unique(np.concatenate([[0.0], np.minimum(ts, t_end), [t_end]]))


def _kernel_arrays(sigma, Rp):
    c = lambda M: np.array(M, dtype=float, order="C")  # noqa: E731
    return c(sigma.A), c(sigma.B), c(sigma.Q), c(sigma.S), c(Rp)


def _integrate(sigma, X0, taus, settings, Rp, stat_rel=0.0, res_tol=0.0, window=0):
    A, B, Q, S, Rp = _kernel_arrays(sigma, Rp)
    return _kernels.integrate_riccati(
        np.array(X0, dtype=float, order="C"), np.asarray(taus, dtype=float),
        A, B, Q, S, Rp,
        settings.rtol, settings.atol, settings.h0, settings.h_min, int(settings.max_steps),
        settings.ceiling, stat_rel, res_tol, int(window))


def _increment_min_eig(values):
    if len(values) < 2:
        return np.zeros(0)
    diffs = np.diff(values, axis=0)
    diffs = 0.5 * (diffs + np.swapaxes(diffs, 1, 2))
    return np.linalg.eigvalsh(diffs)[:, 0]


def _kernel_defects(values, BG):
    if not BG.size:
        return np.zeros(len(values))
    return np.linalg.norm(values @ BG, axis=(1, 2))


@dataclass(frozen=True)
class GrowthDiagnostic:
    """Trailing behaviour of a flow that did not settle.

    ``rate`` is ``|dX/dt|_F`` at the last time, ``order`` is the local
    power-law exponent ``t |dX/dt| / |X|`` (1 for linear growth, large for
    exponential growth, near 0 when the flow is levelling off).
    """

    t_end: float
    norm_end: float
    rate: float
    order: float
    classification: str
    reason: str

    def as_dict(self):
        return {k: getattr(self, k) for k in
                ("t_end", "norm_end", "rate", "order", "classification", "reason")}


def growth_diagnostic(sigma, t_end, X_end, reason, rank_tol=DEFAULT_RANK_TOL):
    rate = float(np.linalg.norm(gcare_residual(sigma, 0.5 * (X_end + X_end.T), rank_tol)))
    norm = float(np.linalg.norm(X_end))
    order = t_end * rate / norm if norm > 0 else 0.0
    if order < 0.05:
        cls = "slow-convergence"
    elif abs(order - 1.0) <= 0.1:
        cls = "linear-growth"
    elif order <= 5.0:
        cls = "polynomial-growth"
    else:
        cls = "exponential-growth"
    return GrowthDiagnostic(float(t_end), norm, rate, float(order), cls, reason)


def _raise_diverged(sigma, status, t_end, X_end, when, rank_tol):
    name = _kernels.STATUS_NAMES[status]
    g = growth_diagnostic(sigma, abs(t_end), X_end, name, rank_tol)
    raise IntegrationDiverged(
        f"Riccati flow failed ({name}) at t = {when:.6g}; |X| = {g.norm_end:.3e}, "
        f"growth {g.classification} (order {g.order:.3g})",
        time=when, reason=name, growth=g)


def _terminal_defect(sigma, H, rank_tol):
    d = derive(sigma, rank_tol)
    U1 = reachable_subspace(d.F, d.B2, rank_tol)
    if U1.dim == 0:
        return 0.0, U1
    return float(np.linalg.norm(H @ U1.basis, 2)), U1


def grde_backward(sigma, H, T, grid=None, settings=IntegrationSettings(),
                  rank_tol=DEFAULT_RANK_TOL, penalty_tol=1e-9):
    """Integrate the GRDE backward from ``P(T) = H`` over ``[0, T]``.

    ``H`` must be PSD and annihilate the reachable subspace of ``(F, B2)``;
    compose :func:`reduce_terminal_penalty` first otherwise.
    """
    H = check_symmetric(H, "H")
    _check_square_like(sigma, H)
    if not is_psd(H):
        raise NotPSD("terminal penalty H is not positive semidefinite")
    defect, _ = _terminal_defect(sigma, H, rank_tol)
    if defect > penalty_tol * (1.0 + np.linalg.norm(H, 2)):
        raise TerminalPenaltyNotReduced(
            f"H does not vanish on the reachable subspace of (F, B2) "
            f"(|H U1| = {defect:.3e}); apply reduce_terminal_penalty first")
    ts = time_grid(T, grid)
    T = float(ts[-1])
    taus = T - ts[::-1]
    taus[0] = 0.0
    Rp = _pinv_R(sigma, rank_tol)
    rec_tau, rec_P, status, tau_end, P_end, n_acc, n_rej = _integrate(
        sigma, H, taus, settings, Rp)
    if status != _kernels.REACHED_END:
        _raise_diverged(sigma, status, tau_end, P_end, T - tau_end, rank_tol)
    values = rec_P[::-1].copy()
    times = T - rec_tau[::-1]
    times[0] = 0.0
    d = derive(sigma, rank_tol)
    return GRDETrajectory(
        times=times, values=values, direction="backward",
        kernel_defect=_kernel_defects(values, sigma.B @ d.G),
        increment_min_eig=_increment_min_eig(rec_P),
        status=_kernels.STATUS_NAMES[status], n_accepted=int(n_acc), n_rejected=int(n_rej),
    )


def grde_forward(sigma, t_max, grid=None, settings=IntegrationSettings(),
                 rank_tol=DEFAULT_RANK_TOL):
    """Integrate ``dX/dt = GCARE residual of X`` forward from ``X(0) = 0``."""
    ts = time_grid(t_max, grid)
    Rp = _pinv_R(sigma, rank_tol)
    rec_t, rec_X, status, t_end, X_end, n_acc, n_rej = _integrate(
        sigma, np.zeros((sigma.n, sigma.n)), ts, settings, Rp)
    if status != _kernels.REACHED_END:
        _raise_diverged(sigma, status, t_end, X_end, t_end, rank_tol)
    d = derive(sigma, rank_tol)
    return GRDETrajectory(
        times=rec_t.copy(), values=rec_X.copy(), direction="forward",
        kernel_defect=_kernel_defects(rec_X, sigma.B @ d.G),
        increment_min_eig=_increment_min_eig(rec_X),
        status=_kernels.STATUS_NAMES[status], n_accepted=int(n_acc), n_rejected=int(n_rej),
    )


@dataclass(frozen=True, eq=False)
class PenaltyCertificate:
    """Coordinates used to reduce a terminal penalty.

    ``U1`` spans the reachable subspace of ``(F, B2)``, ``U2`` its orthogonal
    complement; ``U21 = -H11^+ H12`` and ``H22_tilde = H12^T U21 + H22``.
    """

    U1: np.ndarray
    U2: np.ndarray
    U21: np.ndarray
    H11: np.ndarray
    H22_tilde: np.ndarray


def reduce_terminal_penalty(sigma, H, rank_tol=DEFAULT_RANK_TOL):
    """Replace ``H`` by ``H' = U2 (H22 - H12^T H11^+ H12) U2^T``.

    ``H'`` vanishes on the reachable subspace of ``(F, B2)`` and yields the
    same optimal cost; it equals ``H`` when ``H`` already vanishes there.
    """
    H = check_symmetric(H, "H")
    _check_square_like(sigma, H)
    if not is_psd(H):
        raise NotPSD("terminal penalty H is not positive semidefinite")
    d = derive(sigma, rank_tol)
    reach = reachable_subspace(d.F, d.B2, rank_tol)
    U1 = reach.basis
    U2 = orthogonal_complement(reach).basis
    k = U1.shape[1]
    if k == 0:
        cert = PenaltyCertificate(U1, U2, np.zeros((0, U2.shape[1])), np.zeros((0, 0)),
                                  U2.T @ H @ U2)
        return H.copy(), cert
    H11 = U1.T @ H @ U1
    H12 = U1.T @ H @ U2
    H22 = U2.T @ H @ U2
    U21 = -pseudo_inverse(H11, rank_tol) @ H12
    H22t = H12.T @ U21 + H22
    H22t = 0.5 * (H22t + H22t.T)
    Hr = U2 @ H22t @ U2.T
    return 0.5 * (Hr + Hr.T), PenaltyCertificate(U1, U2, U21, H11, H22t)


@dataclass(frozen=True, eq=False)
class LimitResult:
    Xbar: np.ndarray
    converged: bool
    time: float
    n_accepted: int
    residual_norm: float
    candidate: SolutionCandidate
    trajectory: GRDETrajectory

    def as_dict(self):
        return {
            "Xbar": self.Xbar.tolist(),
            "converged": self.converged,
            "time_to_converge": self.time,
            "n_accepted": self.n_accepted,
            "residual_norm": self.residual_norm,
            "check": self.candidate.as_dict(),
            "flow": self.trajectory.summary(),
        }


def care_limit_solution(sigma, settings=LimitSettings(), rank_tol=DEFAULT_RANK_TOL):
    """Minimal PSD CGCARE solution as the stationary limit of the forward flow.

    Stops once ``|dX/dt|_F <= stat_tol (1 + |X|_F)`` and the residual (which
    equals ``dX/dt``) is at most ``res_tol`` times the size of its terms, for
    ``window`` consecutive accepted steps. Raises :class:`NoConvergence` with
    a :class:`GrowthDiagnostic` when that does not happen by ``t_max``.
    """
    ts = time_grid(settings.t_max, settings.n_record)
    Rp = _pinv_R(sigma, rank_tol)
    rec_t, rec_X, status, t_end, X_end, n_acc, n_rej = _integrate(
        sigma, np.zeros((sigma.n, sigma.n)), ts, settings.integration, Rp,
        settings.stat_tol, settings.res_tol, settings.window)
    d = derive(sigma, rank_tol)
    traj = GRDETrajectory(
        times=rec_t.copy(), values=rec_X.copy(), direction="forward",
        kernel_defect=_kernel_defects(rec_X, sigma.B @ d.G),
        increment_min_eig=_increment_min_eig(rec_X),
        status=_kernels.STATUS_NAMES[status], n_accepted=int(n_acc), n_rejected=int(n_rej),
    )
    if status != _kernels.STATIONARY:
        g = growth_diagnostic(sigma, t_end, X_end, _kernels.STATUS_NAMES[status], rank_tol)
        raise NoConvergence(
            f"forward Riccati flow did not settle by t = {t_end:.6g} ({g.reason}); "
            f"|X| = {g.norm_end:.3e}, |dX/dt| = {g.rate:.3e}, {g.classification}",
            growth=g, trajectory=traj)
    Xbar = 0.5 * (X_end + X_end.T)
    cand = check_cgcare(sigma, Xbar, settings.check_tol, rank_tol)
    if not (cand.is_solution and is_psd(Xbar, 1e-8)):
        g = growth_diagnostic(sigma, t_end, X_end, "stationary-but-not-a-solution", rank_tol)
        raise NoConvergence(
            f"flow settled at t = {t_end:.6g} but the limit fails the CGCARE check "
            f"(residual {cand.gcare_residual_norm:.3e}, kernel defect {cand.kernel_defect:.3e})",
            growth=g, trajectory=traj)
    return LimitResult(
        Xbar=Xbar, converged=True, time=float(t_end), n_accepted=int(n_acc),
        residual_norm=cand.gcare_residual_norm, candidate=cand, trajectory=traj)


class Ordering(enum.Enum):
    LE = "<="
    GE = ">="
    EQ = "="
    INCOMPARABLE = "incomparable"


def compare_psd(X1, X2, tol=1e-9):
    """Loewner order of two symmetric matrices: ``LE`` means ``X1 <= X2``."""
    X1 = check_symmetric(X1, "X1")
    X2 = check_symmetric(X2, "X2")
    if X1.shape != X2.shape:
        raise DimensionMismatch(f"cannot compare {X1.shape} with {X2.shape}")
    D = X2 - X1
    w = np.linalg.eigvalsh(0.5 * (D + D.T))
    scale = tol * max(1.0, float(np.max(np.abs(X1))), float(np.max(np.abs(X2))))
    if np.all(np.abs(w) <= scale):
        return Ordering.EQ
    if w[0] >= -scale:
        return Ordering.LE
    if w[-1] <= scale:
        return Ordering.GE
    return Ordering.INCOMPARABLE


def regular_care_oracle(sigma, rank_tol=DEFAULT_RANK_TOL):
    """Stabilising CARE solution for ``R > 0`` via an ordered Schur form of the
    Hamiltonian matrix. Shares no code with the Riccati flow; meant for tests.
    """
    R = as_matrix(sigma.R)
    w = np.linalg.eigvalsh(0.5 * (R + R.T))
    if w[0] <= rank_tol.cutoff(w[-1]):
        raise NotRegular("R is singular; the regular CARE oracle does not apply")
    n = sigma.n
    Rinv_St = np.linalg.solve(R, sigma.S.T)
    F = sigma.A - sigma.B @ Rinv_St
    Lam = sigma.Q - sigma.S @ Rinv_St
    W = sigma.B @ np.linalg.solve(R, sigma.B.T)
    Ham = np.block([[F, -W], [-Lam, -F.T]])
    T, Z, sdim = scipy.linalg.schur(Ham, output="real", sort="lhp")
    ev = np.linalg.eigvals(T[:n, :n]) if n else np.zeros(0)
    if sdim != n or (ev.size and np.max(ev.real) >= -1e-12 * max(1.0, np.abs(ev).max())):
        raise NoStabilizingSolution(
            f"Hamiltonian has {sdim} stable eigenvalues, need {n}")
    U11, U21 = Z[:n, :n], Z[n:, :n]
    if np.linalg.cond(U11) > 1e12:
        raise NoStabilizingSolution("stable invariant subspace is not a graph")
    X = np.linalg.solve(U11.T, U21.T).T
    return 0.5 * (X + X.T)
