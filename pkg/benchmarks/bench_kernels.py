"""Time the compiled and numpy kernel backends on sampler-sized inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from cohrel import _pykernels, data, kernels, weibull
from cohrel.mcmc import McmcConfig
from cohrel.numerics import RandomStream

try:
    from cohrel import _ckernels
except ImportError:
    _ckernels = None


def workloads(rng):
    n = 300
    t = rng.weibull(2.0, n) * 10 + 0.5
    code = rng.integers(0, 3, n).astype(np.int8)
    l = np.where(code == 2, 0.0, t)
    u = np.where(code == 1, np.inf, t)
    draws = np.column_stack([rng.uniform(1, 3, 1000), rng.uniform(8, 12, 1000), rng.uniform(0, 0.4, 1000)])
    grid = np.linspace(0, 30, 101)
    uni = rng.random(n)
    jobs = {
        "interval_loglik (n=300)": lambda: kernels.interval_loglik(2.0, 10.0, 0.3, l, u, code),
        "branch_likelihoods (n=300)": lambda: kernels.branch_likelihoods(2.0, 10.0, 0.3, t),
        "latent_draw (n=300)": lambda: kernels.latent_draw(2.0, 10.0, 0.3, t, 0.4, 0.0, 0.4, uni),
    }
    # the dispatcher always uses numpy for this one, so time the implementations directly
    impls = {"python": _pykernels, "cython": _ckernels}
    jobs["reliability_matrix (1000x101)"] = lambda: impls[kernels.BACKEND].reliability_matrix(
        draws[:, 0], draws[:, 1], draws[:, 2], grid)
    device_g = data.load_component_csv(data.fixture_path("device_g_components.csv")).column(1)
    short = McmcConfig(iterations=2000, burn_in=1000, thin=1)
    jobs["weibull fit, Device-G (2000 it)"] = lambda: weibull.fit(device_g, short, RandomStream(1))
    return jobs


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    jobs = workloads(np.random.default_rng(0))
    backends = kernels.available_backends()
    print(f"{'kernel':32s}" + "".join(f"{b:>14s}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, fn in jobs.items():
        per_call = {}
        for b in backends:
            with kernels.use_backend(b):
                number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-7)))
                per_call[b] = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
        row = f"{name:32s}" + "".join(f"{per_call[b] * 1e6:11.1f} us" for b in backends)
        if "cython" in per_call:
            row += f"{per_call['python'] / per_call['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
