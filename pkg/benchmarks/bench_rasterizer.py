"""Times the compiled rasterizer core against the pure-PyTorch fallback.

Usage: python benchmarks/bench_rasterizer.py [--splats N] [--size S] [--reps R]
"""

import argparse
import time

import numpy as np
import torch

from c3edit.rasterizer import get_backend


def make_inputs(n_splats, size, seed=0):
    rng = np.random.default_rng(seed)
    means = torch.tensor(
        np.column_stack(
            [rng.uniform(0, size, n_splats), rng.uniform(0, size, n_splats)]
        )
    )
    radii = torch.tensor(rng.uniform(1.0, 6.0, n_splats))
    colors = torch.tensor(rng.uniform(0, 1, (n_splats, 3)))
    opacities = torch.tensor(rng.uniform(0.2, 0.95, n_splats))
    background = torch.tensor([0.5, 0.5, 0.5], dtype=torch.float64)
    return means, radii, colors, opacities, background


def time_backend(backend, inputs, size, reps, with_grad):
    means, radii, colors, opacities, background = inputs

    def once():
        if with_grad:
            args = [t.clone().requires_grad_(True) for t in (means, radii, colors, opacities)]
            image = backend.rasterize(*args, background, size, size)
            image.sum().backward()
        else:
            backend.rasterize(means, radii, colors, opacities, background, size, size)

    once()  # warm up
    start = time.perf_counter()
    for _ in range(reps):
        once()
    return (time.perf_counter() - start) / reps


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--splats", type=int, default=500)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--reps", type=int, default=10)
    args = parser.parse_args()

    inputs = make_inputs(args.splats, args.size)
    backends = {}
    backends["pure"] = get_backend("pure")
    try:
        backends["compiled"] = get_backend("compiled")
    except ImportError:
        print("compiled backend not built; run `python setup.py build_ext --inplace`")

    print(f"{args.splats} splats onto {args.size}x{args.size}, {args.reps} reps\n")
    print(f"{'backend':<10}{'forward':>12}{'fwd+bwd':>12}")
    results = {}
    for name, backend in backends.items():
        fwd = time_backend(backend, inputs, args.size, args.reps, with_grad=False)
        both = time_backend(backend, inputs, args.size, args.reps, with_grad=True)
        results[name] = (fwd, both)
        print(f"{name:<10}{fwd * 1e3:>10.2f}ms{both * 1e3:>10.2f}ms")
    if len(results) == 2:
        speedup = results["pure"][1] / results["compiled"][1]
        print(f"\ncompiled is {speedup:.1f}x the pure backend on forward+backward")


if __name__ == "__main__":
    main()
