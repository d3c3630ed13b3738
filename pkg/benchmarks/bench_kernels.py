"""Wall-clock comparison of the compiled and NumPy simulation kernels.

Usage: python3 benchmarks/bench_kernels.py [--steps 20000] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from doco import algo, kernels, scenarios


def bench(scenario, steps: int, repeat: int):
    L, _ = scenario.objective.convexity_constants()
    x0 = np.zeros((scenario.objective.n, scenario.objective.d))
    out = {}
    for name, fn in (("python", kernels.python_simulate), ("compiled", kernels.compiled_simulate)):
        if fn is None:
            continue

        def call(backend=name):
            algo.simulate(scenario.objective, scenario.topology.W, scenario.A, x0,
                          0.5 / L, steps, "doco", backend)

        out[name] = min(timeit.repeat(call, number=1, repeat=repeat))
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--steps", type=int, default=20000)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    cases = {
        "sinusoidal": scenarios.build_sinusoidal(scenarios.SinusoidalConfig(), args.steps),
        "rods": scenarios.build_rods(scenarios.RodsConfig(), args.steps),
    }
    print(f"{'scenario':<12}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}")
    for name, scen in cases.items():
        t = bench(scen, args.steps, args.repeat)
        comp = t.get("compiled", float("nan"))
        print(f"{name:<12}{t['python']:>12.4f}{comp:>14.4f}{t['python'] / comp:>10.1f}")


if __name__ == "__main__":
    main()
