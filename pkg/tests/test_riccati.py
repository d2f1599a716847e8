import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factory import (
    random_regular,
    random_singular_any,
    random_symmetric,
    random_weights_with_kernel,
    sigma_e1,
    sigma_e2,
    sigma_negative,
)
from gcare.errors import (
    IntegrationDiverged,
    NoConvergence,
    NoStabilizingSolution,
    NotPSD,
    NotRegular,
    TerminalPenaltyNotReduced,
)
from gcare.problem import ProblemData
from gcare.riccati import (
    Ordering,
    care_limit_solution,
    check_cgcare,
    compare_psd,
    gcare_residual,
    grde_backward,
    grde_forward,
    reduce_terminal_penalty,
    reduced_residual,
    regular_care_oracle,
    time_grid,
)

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(1, 6), st.integers(1, 4), st.integers(0, 4))
def test_residual_forms_agree(seed, n, m, r):
    rng = np.random.default_rng(seed)
    s = random_weights_with_kernel(rng, n, m, min(r, m))
    X = random_symmetric(rng, n, 3.0)
    res = gcare_residual(s, X)
    assert np.linalg.norm(res - reduced_residual(s, X)) <= 1e-10 * (1 + np.linalg.norm(res)) * 10


def test_forward_flow_scalar_closed_form():
    flow = grde_forward(sigma_e1(), 4.0, grid=81)
    assert np.max(np.abs(flow.values[:, 0, 0] - np.tanh(flow.times))) < 1e-8
    assert flow.direction == "forward" and flow.final[0, 0] == pytest.approx(np.tanh(4.0))


def test_backward_flow_scalar_closed_form():
    flow = grde_backward(sigma_e1(), np.zeros((1, 1)), 1.0)
    assert flow.values[0, 0, 0] == pytest.approx(np.tanh(1.0), abs=1e-10)
    assert np.max(np.abs(flow.values[:, 0, 0] - np.tanh(1.0 - flow.times))) < 1e-9
    stat = grde_backward(sigma_e1(), np.ones((1, 1)), 5.0)
    assert np.max(np.abs(stat.values - 1.0)) < 1e-12


@settings(max_examples=15, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 3))
def test_time_reversal(seed, n, m):
    # with H = 0 the backward flow is the forward flow read in reverse: P_T(t) = X(T - t)
    s = random_regular(np.random.default_rng(seed), n, m)
    T = 2.0
    back = grde_backward(s, np.zeros((n, n)), T, grid=41)
    fwd = grde_forward(s, T, grid=41)
    scale = 1 + np.max(np.abs(fwd.values))
    assert np.max(np.abs(back.values[::-1] - fwd.values)) <= 1e-7 * scale


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_forward_flow_is_monotone(seed):
    c = random_singular_any(np.random.default_rng(seed))
    lim = care_limit_solution(c.sigma)
    assert np.min(lim.trajectory.increment_min_eig) >= -1e-8 * (1 + np.linalg.norm(lim.Xbar))


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_singular_limit_matches_reduced_oracle(seed):
    c = random_singular_any(np.random.default_rng(seed))
    lim = care_limit_solution(c.sigma)
    expected = c.expected_xbar()
    assert np.linalg.norm(lim.Xbar - expected) <= 1e-6 * max(1.0, np.linalg.norm(expected))
    cand = lim.candidate
    assert cand.is_solution and cand.ker_X_in_ker_Lambda
    assert cand.x_reach_defect <= 1e-6 * (1 + np.linalg.norm(lim.Xbar))


@pytest.mark.parametrize("sigma,expected", [
    (sigma_e1(), [[1.0]]),
    (sigma_e2(), np.diag([1.0, 0.0])),
    (ProblemData([[-1.0]], [[1.0]], [[0.0]], [[0.0]], [[1.0]]), [[0.0]]),
])
def test_limit_examples(sigma, expected):
    lim = care_limit_solution(sigma)
    assert lim.converged
    assert np.allclose(lim.Xbar, expected, atol=1e-8)


def test_limit_is_minimal_among_psd_solutions():
    # x' = x + u with no state weight: X = 0 and X = 2 both solve, the flow picks 0
    s = ProblemData([[1.0]], [[1.0]], [[0.0]], [[0.0]], [[1.0]])
    lim = care_limit_solution(s)
    stab = regular_care_oracle(s)
    assert stab[0, 0] == pytest.approx(2.0)
    assert check_cgcare(s, stab).is_solution
    assert np.allclose(lim.Xbar, 0.0)
    assert compare_psd(lim.Xbar, stab) is Ordering.LE


def test_kernel_constraint_separates_gcare_from_cgcare():
    s = sigma_e2()
    good = check_cgcare(s, np.diag([1.0, 0.0]))
    bad = check_cgcare(s, np.eye(2))
    assert good.is_solution
    assert bad.gcare_residual_norm < 1e-12  # solves the unconstrained equation
    assert not bad.is_solution and bad.kernel_defect == pytest.approx(1.0)


def test_reduce_terminal_penalty_e2():
    s = sigma_e2()
    Hr, cert = reduce_terminal_penalty(s, np.eye(2))
    assert np.allclose(Hr, np.diag([1.0, 0.0]), atol=1e-12)
    assert np.linalg.norm(Hr @ cert.U1) < 1e-12
    Hsame, _ = reduce_terminal_penalty(s, np.diag([2.0, 0.0]))
    assert np.allclose(Hsame, np.diag([2.0, 0.0]))


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_reduced_penalty_annihilates_reachable_subspace(seed):
    rng = np.random.default_rng(seed)
    c = random_singular_any(rng)
    L = rng.standard_normal((c.sigma.n, c.sigma.n))
    Hr, cert = reduce_terminal_penalty(c.sigma, L @ L.T)
    assert np.linalg.norm(Hr @ cert.U1) <= 1e-8 * (1 + np.linalg.norm(L) ** 2)
    assert compare_psd(Hr, L @ L.T, 1e-8) in (Ordering.LE, Ordering.EQ)


def test_backward_refuses_unreduced_or_indefinite_penalty():
    with pytest.raises(TerminalPenaltyNotReduced):
        grde_backward(sigma_e2(), np.eye(2), 1.0)
    with pytest.raises(NotPSD):
        grde_backward(sigma_e1(), -np.ones((1, 1)), 1.0)


def test_backward_kernel_invariant_e2():
    flow = grde_backward(sigma_e2(), np.diag([1.0, 0.0]), 3.0)
    assert np.max(flow.kernel_defect) < 1e-12
    assert np.allclose(flow.values, np.diag([1.0, 0.0]))


def test_negative_case_linear_growth():
    with pytest.raises(NoConvergence) as info:
        care_limit_solution(sigma_negative())
    assert info.value.growth.classification == "linear-growth"
    flow = grde_forward(sigma_negative(), 10.0, grid=101)
    assert np.max(np.abs(flow.values[:, 0, 0] - flow.times)) < 1e-9


def test_exponential_growth_is_diagnosed():
    s = ProblemData([[1.0]], [[0.0]], [[1.0]], [[0.0]], [[1.0]])
    with pytest.raises(NoConvergence) as info:
        care_limit_solution(s)
    assert info.value.growth.classification == "exponential-growth"
    with pytest.raises(IntegrationDiverged) as info:
        grde_forward(s, 100.0)
    assert info.value.reason == "ceiling"


def test_regular_oracle_errors():
    with pytest.raises(NotRegular):
        regular_care_oracle(sigma_e2())
    # uncontrollable unstable mode: no stabilising solution
    s = ProblemData([[1.0]], [[0.0]], [[1.0]], [[0.0]], [[1.0]])
    with pytest.raises(NoStabilizingSolution):
        regular_care_oracle(s)


def test_compare_psd():
    assert compare_psd(np.eye(2), 2 * np.eye(2)) is Ordering.LE
    assert compare_psd(2 * np.eye(2), np.eye(2)) is Ordering.GE
    assert compare_psd(np.eye(2), np.eye(2)) is Ordering.EQ
    assert compare_psd(np.diag([1.0, 0]), np.diag([0.0, 1])) is Ordering.INCOMPARABLE


def test_time_grid_forms():
    assert time_grid(2.0).size == 201
    assert np.allclose(time_grid(1.0, 3), [0.0, 0.5, 1.0])
    assert np.allclose(time_grid(1.0, [0.0, 0.3, 1.0]), [0.0, 0.3, 1.0])
