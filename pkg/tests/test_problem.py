import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from factory import random_weights_with_kernel, sigma_e1, sigma_e2
from gcare.errors import DimensionMismatch, NotPSD, NotSymmetric
from gcare.matlin import is_psd, pseudo_inverse
from gcare.problem import ProblemData, derive, output_factorization, validate, x_derived


def test_dimensions_checked():
    with pytest.raises(DimensionMismatch):
        ProblemData(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((2, 2)),
                    np.zeros((2, 2)), np.zeros((1, 1)))


def test_arrays_are_read_only():
    s = sigma_e1()
    with pytest.raises(ValueError):
        s.A[0, 0] = 1.0


def test_validate_examples():
    assert validate(sigma_e1()).ok
    assert validate(sigma_e2()).ok
    bad = ProblemData([[0.0]], [[1.0]], [[-1.0]], [[0.0]], [[1.0]])
    rep = validate(bad)
    assert not rep.ok and not rep.pi_psd
    assert any("Π not positive semidefinite" in msg for msg in rep.messages)


def test_validate_kernel_containment_failure():
    s = ProblemData([[0.0]], [[1.0]], [[10.0]], [[1.0]], [[0.0]])
    rep = validate(s)
    assert not rep.kernel_containment and not rep.ok
    assert rep.kernel_containment_defect == pytest.approx(1.0)


def test_validate_reports_asymmetry():
    s = ProblemData(np.zeros((2, 2)), np.eye(2), np.array([[1.0, 0.5], [0.0, 1.0]]),
                    np.zeros((2, 2)), np.eye(2))
    rep = validate(s)
    assert not rep.ok
    assert rep.symmetry_defects["Q"] == pytest.approx(0.5)


def test_derive_on_e2():
    d = derive(sigma_e2())
    assert np.allclose(d.G, np.diag([0.0, 1.0]))
    assert np.allclose(d.Rp, np.diag([1.0, 0.0]))
    assert d.rank_R == 1 and d.rank_Pi == 2
    assert np.allclose(d.Lam, np.diag([1.0, 0.0]))
    assert np.allclose(np.abs(d.B2.ravel()), [0.0, 1.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(1, 4), st.integers(0, 4))
def test_derived_quantities(seed, n, m, r):
    rng = np.random.default_rng(seed)
    s = random_weights_with_kernel(rng, n, m, min(r, m))
    d = derive(s)
    assert np.allclose(d.G, np.eye(m) - pseudo_inverse(s.R) @ s.R, atol=1e-8)
    # generalised Schur complements of a PSD Pi are PSD
    assert is_psd(d.Lam, 1e-8)
    CD = np.hstack([d.C, d.D])
    assert np.linalg.norm(CD.T @ CD - s.Pi) <= 1e-9 * (1 + np.linalg.norm(s.Pi))
    assert np.allclose(d.C0, d.C - d.D @ d.Rp @ s.S.T)
    assert np.allclose(d.A0, s.A - s.B @ d.Rp @ s.S.T)
    # ker R is contained in ker S under the standing assumption
    assert np.linalg.norm(s.S @ d.G) <= 1e-8 * (1 + np.linalg.norm(s.S))


def test_output_factorization_rejects_indefinite():
    with pytest.raises(NotPSD):
        output_factorization(np.diag([1.0, -1.0]), 1)


def test_x_derived():
    s = sigma_e1()
    xd = x_derived(s, [[2.0]])
    assert xd.Q_X[0, 0] == 1.0 and xd.S_X[0, 0] == 2.0
    assert xd.K_X[0, 0] == 2.0 and xd.A_X[0, 0] == -2.0
    with pytest.raises(NotSymmetric):
        x_derived(sigma_e2(), [[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(DimensionMismatch):
        x_derived(sigma_e2(), [[1.0]])
