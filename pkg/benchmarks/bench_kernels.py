"""Compiled vs pure-Python kernels on the four-plant example.

    python benchmarks/bench_kernels.py [--repeat 200]

Times each kernel on the stacked 8-state, 44-interval system and then a
full min-max solve with each backend swapped in.
"""

import argparse
import time
import timeit

import numpy as np

from minmaxlq import _pykernels, kernels
from minmaxlq.discretize import discretize_problem
from minmaxlq.model import load_problem, shipped_problem_path
from minmaxlq.riccati import ExtendedSystem
from minmaxlq.solver import solve_minmax

KERNELS = ("riccati_sweep", "riccati_value", "rollout", "quadratic_cost")


def _use(impl):
    for name in KERNELS:
        setattr(kernels, name, getattr(impl, name))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()

    compiled = kernels.compiled_kernels()
    if compiled is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    problem = load_problem(shipped_problem_path("ex2"))
    disc = discretize_problem(problem)
    system = ExtendedSystem(disc)
    ext = system.extend(np.array([0.4842, 0.1842, 0.1432, 0.1884]))
    x0 = system.stack_state(problem.x0)
    K = _pykernels.riccati_sweep(ext.Phi, ext.Gamma, ext.Pi, ext.Theta, ext.Psi, ext.G)[1]
    V = _pykernels.rollout(ext.Phi, ext.Gamma, K, x0)[1]
    p = disc[0]
    calls = {
        "riccati_sweep": lambda m: m.riccati_sweep(ext.Phi, ext.Gamma, ext.Pi, ext.Theta, ext.Psi, ext.G),
        "riccati_value": lambda m: m.riccati_value(ext.Phi, ext.Gamma, ext.Pi, ext.Theta, ext.Psi, ext.G, x0),
        "rollout": lambda m: m.rollout(ext.Phi, ext.Gamma, K, x0),
        "quadratic_cost": lambda m: m.quadratic_cost(p.Phi, p.Gamma, p.Pi, p.Theta, p.Psi, p.G, problem.x0, V),
    }

    print(f"{'kernel':<16}{'python [us]':>14}{'compiled [us]':>16}{'speedup':>10}")
    for name, call in calls.items():
        t_py = min(timeit.repeat(lambda: call(_pykernels), number=args.repeat, repeat=3)) / args.repeat
        t_c = min(timeit.repeat(lambda: call(compiled), number=args.repeat, repeat=3)) / args.repeat
        print(f"{name:<16}{t_py * 1e6:>14.1f}{t_c * 1e6:>16.1f}{t_py / t_c:>9.1f}x")

    original = {name: getattr(kernels, name) for name in KERNELS}
    results = {}
    try:
        for label, impl in (("python", _pykernels), ("compiled", compiled)):
            _use(impl)
            start = time.perf_counter()
            sol = solve_minmax(problem, disc)
            results[label] = (time.perf_counter() - start, sol)
    finally:
        for name, fn in original.items():
            setattr(kernels, name, fn)
    (t_py, a), (t_c, b) = results["python"], results["compiled"]
    print(f"\nfull solve ({a.iterations} iterations): python {t_py:.3f}s, compiled {t_c:.3f}s, {t_py / t_c:.1f}x")
    print(f"max |mu* difference| between backends: {np.abs(a.mu_star - b.mu_star).max():.2e}")


if __name__ == "__main__":
    main()
