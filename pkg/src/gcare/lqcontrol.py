"""Finite- and infinite-horizon LQ synthesis, closed-loop simulation and cost
quadrature.

Optimal inputs have the form ``u(t) = -K(t) x(t) + G v(t)`` where
``K(t) = R^+ (S^T + B^T P(t))``, ``G`` projects onto ``ker R`` and ``v`` is
a free signal; ``v = 0`` is used unless one is attached with
:func:`control_family`.
"""

import enum
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import simpson, trapezoid

from . import _kernels
from .errors import DimensionMismatch, IntegrationDiverged, TerminalPenaltyNotReduced
from .matlin import DEFAULT_RANK_TOL, as_matrix, numerical_rank
from .problem import derive
from .riccati import (
    IntegrationSettings,
    LimitSettings,
    _terminal_defect,
    care_limit_solution,
    grde_backward,
    reduce_terminal_penalty,
    time_grid,
)

__all__ = [
    "FiniteHorizonProblem",
    "ControlLaw",
    "Trajectory",
    "LQSolution",
    "SimulationSettings",
    "Finiteness",
    "solve_finite",
    "solve_infinite",
    "control_family",
    "simulate_closed_loop",
    "evaluate_cost",
    "finiteness_probe",
]


@dataclass(frozen=True, eq=False)
class FiniteHorizonProblem:
    sigma: object
    H: np.ndarray
    T: float
    x0: np.ndarray

    def __post_init__(self):
        n = self.sigma.n
        H = as_matrix(self.H, "H")
        x0 = np.asarray(self.x0, dtype=float).ravel()
        if H.shape != (n, n) or x0.shape != (n,):
            raise DimensionMismatch(f"H{H.shape} / x0{x0.shape} do not match n={n}")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "T", float(self.T))


@dataclass(frozen=True)
class SimulationSettings:
    n_grid: int = 4001
    rtol: float = 1e-10
    atol: float = 1e-12
    ceiling: float = 1e12
    max_steps: int = 2_000_000
    tail_tol: float = 1e-6  # integrand level that ends an infinite-horizon run
    t_cap: float = 1e3


@dataclass(frozen=True, eq=False)
class ControlLaw:
    """``u(t) = -K(t) x + G v(t)``.

    A constant law has one gain knot. A time-varying law stores gains ``K`` and
    their time derivatives ``dK`` at ``gain_times`` and is interpolated by
    cubic Hermite polynomials. The free signal is piecewise linear over
    ``v_times`` (one knot means constant).
    """

    kind: str
    gain_times: np.ndarray
    K: np.ndarray
    dK: np.ndarray
    G: np.ndarray
    v_times: np.ndarray
    v_values: np.ndarray

    @classmethod
    def constant(cls, K, G):
        K = as_matrix(K, "K")
        m = K.shape[0]
        return cls("constant-feedback", np.zeros(1), K[None], np.zeros_like(K)[None],
                   as_matrix(G, "G"), np.zeros(1), np.zeros((1, m)))

    @property
    def m(self):
        return self.K.shape[1]

    @property
    def n(self):
        return self.K.shape[2]

    def gain(self, t):
        return _kernels.hermite_eval(self.gain_times, self.K, self.dK, float(t))

    def free_signal(self, t):
        return _kernels.linear_eval(self.v_times, self.v_values[:, :, None], float(t))[:, 0]

    def input(self, t, x):
        return -self.gain(t) @ x + self.G @ self.free_signal(t)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    u: np.ndarray
    integrand: np.ndarray

    def rows(self):
        return np.column_stack([self.times, self.x, self.u, self.integrand])


@dataclass(frozen=True, eq=False)
class LQSolution:
    optimal_value: float
    value_matrix: np.ndarray
    law: ControlLaw
    trajectory: Trajectory
    cost: float
    cost_error: float
    H_used: np.ndarray = None
    penalty_reduced: bool = False
    flow: object = None

    def as_dict(self):
        out = {
            "optimal_value": self.optimal_value,
            "value_matrix": self.value_matrix.tolist(),
            "law": self.law.kind,
            "simulated_cost": self.cost,
            "simulated_cost_error": self.cost_error,
            "simulated_horizon": float(self.trajectory.times[-1]),
        }
        if self.law.kind == "constant-feedback":
            out["K"] = self.law.K[0].tolist()
        if self.H_used is not None:
            out["H_used"] = self.H_used.tolist()
            out["penalty_reduced"] = bool(self.penalty_reduced)
        return out


def _ensure_vector(x, n, name="x0"):
    x = np.asarray(x, dtype=float).ravel()
    if x.shape != (n,):
        raise DimensionMismatch(f"{name} has {x.size} entries, expected {n}")
    return x


def simulate_closed_loop(sigma, law, x0, T, grid=None, settings=SimulationSettings()):
    """Integrate ``x' = A x + B u`` with ``u = law.input(t, x)`` on ``[0, T]``.

    Samples land exactly on the output grid (``settings.n_grid`` uniform
    points unless ``grid`` is given). The running-cost integrand
    ``[x; u]^T Pi [x; u]`` is recorded with every sample.
    """
    n, m = sigma.n, sigma.m
    x0 = _ensure_vector(x0, n)
    if law.K.shape[1:] != (m, n):
        raise DimensionMismatch(f"law gain is {law.K.shape[1:]}, expected {(m, n)}")
    ts = time_grid(T, settings.n_grid if grid is None else grid)
    c = lambda M: np.array(M, dtype=float, order="C")  # noqa: E731
    rec_t, rec_x, status, t_end, _, _, _ = _kernels.integrate_feedback(
        c(x0.reshape(n, 1)), ts, c(sigma.A), c(sigma.B), c(law.G),
        c(law.gain_times), c(law.K), c(law.dK), c(law.v_times), c(law.v_values[:, :, None]),
        settings.rtol, settings.atol, 0.0, 1e-14, int(settings.max_steps), settings.ceiling)
    if status != _kernels.REACHED_END:
        raise IntegrationDiverged(
            f"closed-loop simulation failed ({_kernels.STATUS_NAMES[status]}) at t = {t_end:.6g}",
            time=float(t_end), reason=_kernels.STATUS_NAMES[status])
    xs = rec_x[:, :, 0]
    us = np.array([law.input(t, x) for t, x in zip(rec_t, xs)]).reshape(len(rec_t), m)
    z = np.hstack([xs, us])
    integrand = np.einsum("ki,ij,kj->k", z, sigma.Pi, z)
    return Trajectory(rec_t.copy(), xs.copy(), us, integrand)


def evaluate_cost(traj, sigma, H=None, return_error=False):
    """Composite Simpson quadrature of the running cost plus ``x(T)^T H x(T)``.

    The error estimate compares Simpson on the full grid with Simpson on every
    other sample (Richardson, factor 1/15).
    """
    t, f = traj.times, traj.integrand
    if t.size < 2:
        value, err = 0.0, 0.0
    else:
        value = float(simpson(f, x=t))
        if t.size >= 5:
            coarse_idx = np.arange(0, t.size, 2)
            if coarse_idx[-1] != t.size - 1:
                coarse_idx = np.append(coarse_idx, t.size - 1)
            err = abs(value - float(simpson(f[coarse_idx], x=t[coarse_idx]))) / 15.0
        else:
            err = abs(value - float(trapezoid(f, x=t)))
    if H is not None:
        xT = traj.x[-1]
        value += float(xT @ as_matrix(H, "H") @ xT)
    return (value, err) if return_error else value


def _gain_schedule(sigma, flow, Rp):
    """Gains ``R^+ (S^T + B^T P)`` and their derivatives along a backward flow."""
    P = flow.values
    K = np.einsum("ij,kjl->kil", Rp, sigma.S.T + np.einsum("ji,kjl->kil", sigma.B, P))
    c = lambda M: np.array(M, dtype=float, order="C")  # noqa: E731
    A, B, Q, S, Rpc = c(sigma.A), c(sigma.B), c(sigma.Q), c(sigma.S), c(Rp)
    # dP/dt = -(riccati right-hand side) along the backward flow
    dP = np.array([-_kernels.riccati_rhs(c(Pk), A, B, Q, S, Rpc) for Pk in P])
    dK = np.einsum("ij,kjl->kil", Rp @ sigma.B.T, dP)
    return K, dK


def solve_finite(problem, settings=IntegrationSettings(), sim=SimulationSettings(),
                 reduce_penalty=True, rank_tol=DEFAULT_RANK_TOL, penalty_tol=1e-9):
    """Optimal finite-horizon control and cost ``x0^T P_T(0) x0``.

    A terminal penalty that does not vanish on the reachable subspace of
    ``(F, B2)`` is first replaced by its reduced form; with
    ``reduce_penalty=False`` that situation raises
    :class:`TerminalPenaltyNotReduced` instead.
    """
    sigma, H = problem.sigma, problem.H
    defect, _ = _terminal_defect(sigma, H, rank_tol)
    reduced = defect > penalty_tol * (1.0 + np.linalg.norm(H, 2))
    if reduced:
        if not reduce_penalty:
            raise TerminalPenaltyNotReduced(
                f"|H U1| = {defect:.3e}; terminal penalty must be reduced first")
        H, _ = reduce_terminal_penalty(sigma, H, rank_tol)
    d = derive(sigma, rank_tol)
    flow = grde_backward(sigma, H, problem.T, grid=sim.n_grid, settings=settings,
                         rank_tol=rank_tol, penalty_tol=max(penalty_tol, 1e-8))
    K, dK = _gain_schedule(sigma, flow, d.Rp)
    m = sigma.m
    law = ControlLaw("time-varying-feedback", flow.times.copy(), K, dK, d.G.copy(),
                     np.zeros(1), np.zeros((1, m)))
    P0 = flow.values[0]
    value = float(problem.x0 @ P0 @ problem.x0)
    traj = simulate_closed_loop(sigma, law, problem.x0, problem.T, grid=flow.times,
                                settings=sim)
    # with v = 0 the law does not steer the costless directions, so the simulated
    # terminal cost is taken against the penalty actually used by the flow
    cost, err = evaluate_cost(traj, sigma, H=H, return_error=True)
    return LQSolution(value, P0, law, traj, cost, err, H_used=H, penalty_reduced=bool(reduced),
                      flow=flow)


def solve_infinite(sigma, x0, settings=LimitSettings(), sim=SimulationSettings(),
                   horizon=None, rank_tol=DEFAULT_RANK_TOL):
    """Constant optimal law ``K = R^+ (S^T + B^T Xbar)`` and value ``x0^T Xbar x0``.

    The closed loop is simulated on ``[0, horizon]``; without a horizon it is
    doubled from 10 until the running-cost integrand falls below
    ``sim.tail_tol`` (capped at ``sim.t_cap``).
    """
    x0 = _ensure_vector(x0, sigma.n)
    lim = care_limit_solution(sigma, settings, rank_tol)
    d = derive(sigma, rank_tol)
    Xbar = lim.Xbar
    K = d.Rp @ (sigma.S.T + sigma.B.T @ Xbar)
    law = ControlLaw.constant(K, d.G)
    traj = simulate_until_tail(sigma, law, x0, horizon, sim)
    cost, err = evaluate_cost(traj, sigma, return_error=True)
    return LQSolution(float(x0 @ Xbar @ x0), Xbar, law, traj, cost, err, flow=lim)


def simulate_until_tail(sigma, law, x0, horizon=None, sim=SimulationSettings()):
    """Simulate on ``[0, horizon]``, or grow the horizon until the integrand tail is small."""
    if horizon is not None:
        return simulate_closed_loop(sigma, law, x0, horizon, settings=sim)
    T = 10.0
    while True:
        n_grid = max(sim.n_grid, int(200 * T) + 1)
        traj = simulate_closed_loop(sigma, law, x0, T, settings=replace(sim, n_grid=n_grid))
        if traj.integrand[-1] < sim.tail_tol or T >= sim.t_cap:
            return traj
        T = min(2 * T, sim.t_cap)


def control_family(law, v, times=None):
    """Attach a free signal ``v`` to ``law``; the feedback part is untouched.

    ``v`` may be a constant vector of length m, an array of samples at
    ``times`` (shape ``(len(times), m)``), or a callable sampled at ``times``.
    """
    m = law.m
    if callable(v):
        if times is None:
            raise ValueError("sampling a callable free signal needs explicit times")
        times = np.asarray(times, dtype=float)
        vals = np.array([np.asarray(v(t), dtype=float).ravel() for t in times])
    else:
        vals = np.asarray(v, dtype=float)
        if vals.ndim == 1:
            times, vals = np.zeros(1), vals[None]
        elif times is None:
            raise ValueError("sampled free signals need their sample times")
        times = np.asarray(times, dtype=float)
    if vals.ndim != 2 or vals.shape[1] != m or vals.shape[0] != times.shape[0]:
        raise DimensionMismatch(f"free signal has shape {vals.shape}, expected (k, {m})")
    return replace(law, v_times=times.copy(), v_values=vals.copy())


class Finiteness(enum.Enum):
    SUFFICIENT_PASS = "sufficient-pass"
    UNKNOWN = "unknown"


def finiteness_probe(sigma, rank_tol=DEFAULT_RANK_TOL):
    """One-sided test for finite optimal cost from every initial state.

    Stabilisability of ``(A, B)`` (Hautus test on the eigenvalues with
    non-negative real part) is sufficient; otherwise the answer is unknown.
    """
    n = sigma.n
    eig = np.linalg.eigvals(sigma.A) if n else np.zeros(0)
    for lam in eig:
        if lam.real < 0:
            continue
        M = np.hstack([sigma.A - lam * np.eye(n), sigma.B])
        if _complex_rank(M, rank_tol) < n:
            return Finiteness.UNKNOWN
    return Finiteness.SUFFICIENT_PASS


def _complex_rank(M, tol):
    if np.iscomplexobj(M) and np.any(M.imag):
        s = np.linalg.svd(M, compute_uv=False)
        return int(np.sum(s > tol.cutoff(s[0]))) if s.size else 0
    return numerical_rank(M.real, tol)
