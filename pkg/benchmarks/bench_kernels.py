"""Time the closed-form rate kernels with numba and with plain numpy.

Run ``python benchmarks/bench_kernels.py [--points N] [--modes M]``.
"""

import argparse
import time

import numpy as np

from mmpurcell import _kernels


def random_inputs(n, m, seed=0):
    rng = np.random.default_rng(seed)
    omega = rng.uniform(10.0, 40.0, m)
    delta = np.linspace(2.0, 9.0, n)[:, None] - omega[None, :]
    kappa = rng.uniform(0.001, 0.01, m)
    g = rng.uniform(0.01, 0.2, m)
    J = rng.uniform(0.0, 0.1, (m, m))
    J = np.triu(J, 1) + np.triu(J, 1).T
    theta = rng.uniform(-np.pi, np.pi, (m, m))
    theta = np.triu(theta, 1) - np.triu(theta, 1).T
    cmat = J * np.cos(theta)
    a = g * np.exp(1j * rng.uniform(-np.pi, np.pi, m))
    b = J * np.exp(1j * theta)
    return delta, kappa, g, cmat, a, b


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--points", type=int, default=200_000)
    p.add_argument("--modes", type=int, default=8)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    delta, kappa, g, cmat, a, b = random_inputs(args.points, args.modes)
    kernels = {
        "pair_sums": lambda: _kernels.pair_sums(delta, kappa, g, cmat),
        "self_energy_sums": lambda: _kernels.self_energy_sums(delta, kappa, g, cmat),
        "three_mode_sum": lambda: _kernels.three_mode_sum(delta, kappa, a, b),
    }
    backends = ["numpy"] + (["numba"] if _kernels.NUMBA_AVAILABLE else [])
    print(f"points={args.points} modes={args.modes}")
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    previous = _kernels.backend()
    try:
        for name, fn in kernels.items():
            row = {}
            ref = None
            for be in backends:
                _kernels.set_backend(be)
                fn()  # compile / warm up
                row[be] = best_of(fn, args.repeat)
                out = fn()
                out = out if isinstance(out, tuple) else (out,)
                if ref is None:
                    ref = out
                else:
                    for x, y in zip(ref, out):
                        np.testing.assert_allclose(x, y, rtol=1e-10, atol=0)
            speed = row["numpy"] / row["numba"] if "numba" in row else float("nan")
            print(f"{name:<18}" + "".join(f"{row[b]:>11.4f}s" for b in backends) + f"{speed:>9.1f}x")
    finally:
        _kernels.set_backend(previous)


if __name__ == "__main__":
    main()
