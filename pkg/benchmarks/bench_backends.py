"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_backends.py            # kernel micro-benchmarks
    python benchmarks/bench_backends.py --pipeline # plus a paper-scale phantom run per backend
"""

import argparse
import time

import numpy as np

from tgi3d import backend, reconstruct, scene, signal
from tgi3d.experiments import run_phantom_experiment


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def kernel_cases(K, P, pixels):
    samples = np.empty((K, P))
    out = np.empty((K, P))
    frames = np.zeros((K, pixels))
    corr = np.random.default_rng(0).uniform(-1, 1, size=(pixels, P))
    valid = np.ones(P, dtype=np.uint8)
    return {
        f"fill_uniform {K}x{P}": lambda k: k.fill_uniform(1, 2, 0, samples),
        f"prefix_sum {K}x{P}": lambda k: k.prefix_sum(samples, 1.0, out),
        f"add_gaussian {K}x{pixels}": lambda k: k.add_gaussian(1, 3, 0, 1.0, frames),
        f"masked_argmax {pixels}x{P}": lambda k: k.masked_argmax(corr, valid),
    }


def use(kernels):
    for mod in (signal, scene, reconstruct):
        mod.kernels = kernels


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--k", type=int, default=6000)
    parser.add_argument("--p", type=int, default=1200)
    parser.add_argument("--pixels", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--pipeline", action="store_true")
    args = parser.parse_args()

    compiled = backend.kernels if backend.NAME == "cython" else None
    print(f"selected backend: {backend.NAME}")
    print(f"{'kernel':32s} {'cython s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, case in kernel_cases(args.k, args.p, args.pixels).items():
        slow = best_of(lambda: case(backend.fallback), args.repeat)
        if compiled is None:
            print(f"{name:32s} {'n/a':>10s} {slow:10.3f}")
            continue
        fast = best_of(lambda: case(compiled), args.repeat)
        print(f"{name:32s} {fast:10.3f} {slow:10.3f} {slow / fast:7.1f}x")

    if args.pipeline:
        for label, kernels in (("cython", compiled), ("numpy", backend.fallback)):
            if kernels is None:
                continue
            use(kernels)
            start = time.perf_counter()
            run = run_phantom_experiment(K=args.k, dsnr_db=15.0, P=args.p, shutter=args.p)
            print(f"phantom 120x120 K={args.k} P={args.p} [{label}]: {time.perf_counter() - start:.2f}s, RMSE {run.rmse:.4f}")
        use(backend.kernels)


if __name__ == "__main__":
    main()
