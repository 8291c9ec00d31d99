"""Compare the numba and pure-numpy backends.

    python3 benchmarks/bench_backends.py [--n 20 2000] [--iters 2000]

Times one log-density/gradient evaluation and a short HMC run per backend
on simulated regression data, and checks that both return the same draws.
"""

import argparse
import time

import numpy as np

from robust_t import kernels
from robust_t.experiments import SimConfig, simulate_dataset
from robust_t.hmc import random_streams
from robust_t.special import student_log_const


def best_of(fn, repeat=5):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def bench(n, iters, gamma=4, n_leap=20, step=0.01):
    d = simulate_dataset(SimConfig(n=n, p=2, covariate_scheme="iid_standard_normal", seed=1))
    X, y = np.ascontiguousarray(d.design), np.ascontiguousarray(d.response)
    args = (X, y, float(gamma), float(n), student_log_const(gamma))
    theta = np.array([1.0, 1.0, 0.0])
    grad = np.empty(3)
    xi, log_u = random_streams(0, iters, 3)
    rows = []
    draws = {}
    for backend in ("numba", "numpy"):
        lg = kernels.LOGPOST_GRAD[backend]
        lg(theta, grad, *args)  # compile
        kernels.hmc_student(X, y, gamma, n, args[-1], theta, step, n_leap, np.ones(3), xi[:2], log_u[:2], backend)
        t_eval = best_of(lambda: [lg(theta, grad, *args) for _ in range(200)]) / 200

        def run():
            draws[backend] = kernels.hmc_student(X, y, gamma, n, args[-1], theta, step, n_leap,
                                                 np.ones(3), xi, log_u, backend)[0]

        t_hmc = best_of(run, repeat=2 if backend == "numpy" else 5)
        rows.append((backend, t_eval, t_hmc))
    same = np.allclose(draws["numba"], draws["numpy"], rtol=1e-9, atol=1e-12)
    return rows, same


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[20, 2000])
    ap.add_argument("--iters", type=int, default=2000)
    a = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed")
    print(f"{'n':>6} {'backend':>8} {'eval (us)':>10} {'hmc (s)':>9} {'speedup':>8}")
    for n in a.n:
        rows, same = bench(n, a.iters)
        base = rows[1][2]
        for backend, te, th in rows:
            print(f"{n:>6} {backend:>8} {te * 1e6:>10.2f} {th:>9.3f} {base / th:>8.1f}")
        print(f"{'':>6} draws agree: {same}")


if __name__ == "__main__":
    main()
