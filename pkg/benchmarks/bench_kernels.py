"""Compiled versus pure-numpy integration kernels.

Times the DOPRI5 driver on a forward Riccati flow and a closed-loop
simulation with numba, then repeats the run in a child process started with
``GCARE_DISABLE_NUMBA=1`` (the pure-numpy fallback) and checks that both give
the same answer.

    python3 benchmarks/bench_kernels.py [--n 6] [--m 3] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from gcare import _kernels
from gcare._accel import USE_NUMBA


def problem(n, m, seed=0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    L = rng.standard_normal((n, n))
    return A, B, L @ L.T / n + np.eye(n), np.zeros((n, m)), np.eye(m)


def riccati_job(A, B, Q, S, Rp, t_end):
    n, m = B.shape
    e1, e2, e3 = np.zeros(1), np.zeros((1, m, n)), np.zeros((1, m, 1))
    params = (A, B, Q, S, Rp, np.zeros((m, m)), e1, e2, e2, e1, e3)
    args = (_kernels.RICCATI_FIELD, True, np.zeros((n, n)), np.linspace(0, t_end, 101),
            params, 1e-10, 1e-12, 0.0, 1e-14, 10**7, 1e12, 0.0, 0.0, 0)
    return args


def feedback_job(A, B, t_end):
    n, m = B.shape
    rng = np.random.default_rng(1)
    ts = np.linspace(0.0, t_end, 51)
    K = np.repeat(0.3 * rng.standard_normal((1, m, n)), ts.size, axis=0)
    params = (A, B, np.zeros((n, n)), np.zeros((n, m)), np.zeros((m, m)), np.eye(m),
              ts, K, np.zeros_like(K), np.zeros(1), np.zeros((1, m, 1)))
    return (_kernels.FEEDBACK_FIELD, False, np.ones((n, 1)), np.linspace(0, t_end, 101),
            params, 1e-10, 1e-12, 0.0, 1e-14, 10**7, 1e12, 0.0, 0.0, 0)


def best_of(f, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = f(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def run_jobs(a):
    A, B, Q, S, Rp = problem(a.n, a.m)
    jobs = {"riccati": riccati_job(A, B, Q, S, Rp, a.t_end),
            "feedback": feedback_job(A, B, a.t_end)}
    out = {}
    for name, args in jobs.items():
        _kernels._dopri(*args)  # load from cache or compile
        t, res = best_of(_kernels._dopri, args, a.repeat)
        out[name] = {"seconds": t, "steps": int(res[5]), "final": res[4].tolist()}
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--m", type=int, default=3)
    ap.add_argument("--t-end", type=float, default=5.0)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    a = ap.parse_args()
    if a.worker:
        print(json.dumps(run_jobs(a)))
        return
    if not USE_NUMBA:
        print("numba disabled (GCARE_DISABLE_NUMBA set or numba missing); nothing to compare")
        return
    fast = run_jobs(a)
    cmd = [sys.executable, __file__, "--worker", "--n", str(a.n), "--m", str(a.m),
           "--t-end", str(a.t_end), "--repeat", str(a.repeat)]
    env = dict(os.environ, GCARE_DISABLE_NUMBA="1")
    slow = json.loads(subprocess.run(cmd, env=env, capture_output=True, text=True,
                                     check=True).stdout)
    print(f"n={a.n} m={a.m} t_end={a.t_end} (best of {a.repeat})")
    print(f"{'job':<10}{'steps':>8}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}"
          f"{'max diff':>12}")
    for name in fast:
        f, s_ = fast[name], slow[name]
        diff = float(np.max(np.abs(np.array(f["final"]) - np.array(s_["final"]))))
        print(f"{name:<10}{f['steps']:>8}{f['seconds']:>12.4f}{s_['seconds']:>12.4f}"
              f"{s_['seconds'] / f['seconds']:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
