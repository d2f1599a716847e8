import os
import subprocess
import sys

import numpy as np
import pytest

from gcare import _kernels
from gcare._accel import USE_NUMBA, python_version_of

A = np.array([[0.0, 1.0], [-2.0, -0.3]])
B = np.array([[0.0], [1.0]])
Q = np.eye(2)
S = np.zeros((2, 1))
Rp = np.eye(1)


def test_rhs_matches_python_version():
    X = np.array([[1.0, 0.2], [0.2, 0.5]])
    fast = _kernels.riccati_rhs(X, A, B, Q, S, Rp)
    slow = python_version_of(_kernels.riccati_rhs)(X, A, B, Q, S, Rp)
    assert np.allclose(fast, slow, atol=1e-14)
    expected = X @ A + A.T @ X - (S + X @ B) @ Rp @ (S + X @ B).T + Q
    assert np.allclose(fast, expected, atol=1e-14)


def test_hermite_reproduces_cubics():
    ts = np.array([0.0, 0.7, 2.0])
    f = lambda t: 1 - 2 * t + 0.5 * t**3  # noqa: E731
    df = lambda t: -2 + 1.5 * t**2  # noqa: E731
    Ys = np.array([[[f(t)]] for t in ts])
    dYs = np.array([[[df(t)]] for t in ts])
    for t in (0.0, 0.3, 1.1, 2.0, 2.5):
        tc = min(t, 2.0)
        assert _kernels.hermite_eval(ts, Ys, dYs, t)[0, 0] == pytest.approx(f(tc), abs=1e-12)


def test_integrators_agree_with_python_versions():
    t_out = np.linspace(0.0, 3.0, 31)
    args = (np.zeros((2, 2)), t_out, A, B, Q, S, Rp, 1e-10, 1e-12, 0.0, 1e-14,
            100000, 1e8, 0.0, 0.0, 0)
    fast = _kernels.integrate_riccati(*args)
    # the same driver run through the uncompiled function
    m = B.shape[1]
    e1, e2, e3 = np.zeros(1), np.zeros((1, m, 2)), np.zeros((1, m, 1))
    params = (A, B, Q, S, Rp, np.zeros((m, m)), e1, e2, e2, e1, e3)
    slow = python_version_of(_kernels._dopri)(
        _kernels.RICCATI_FIELD, True, np.zeros((2, 2)), t_out, params, 1e-10, 1e-12, 0.0,
        1e-14, 100000, 1e8, 0.0, 0.0, 0) if USE_NUMBA else fast
    assert fast[2] == _kernels.REACHED_END
    assert np.allclose(fast[1], slow[1], atol=1e-12)
    assert np.allclose(fast[0], t_out)


def test_disable_flag_selects_numpy_path():
    code = ("from gcare import _accel, care_limit_solution, ProblemData;"
            "r = care_limit_solution(ProblemData([[0.]],[[1.]],[[1.]],[[0.]],[[1.]]));"
            "print(_accel.USE_NUMBA, repr(float(r.Xbar[0, 0])))")
    env = dict(os.environ, GCARE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True).stdout.split()
    assert out[0] == "False"
    assert float(out[1]) == pytest.approx(1.0, abs=1e-8)
