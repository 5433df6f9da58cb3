#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the three hot paths on realistic workloads:
  ensemble   - 200 uniform-in-ball RK4 trajectories of the bistable flow
  discriminate - 500 first-entry decisions at k = 10
  master-eq  - 40 operator-form trajectories to t = 10

Run with: python benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from ptpflow.dynamics import DissipativeTorsionParams, dissipative_torsion_field
from ptpflow.kernels import backend_module
from ptpflow.scenario import sample_ball

PARAMS = DissipativeTorsionParams(1.1, 1.0, 1.0)
FIELD = dissipative_torsion_field(PARAMS)
FP = np.array([0.41659779, 0.19090909, 0.45825757])
TARGETS = np.stack([FP, np.array([-FP[0], FP[1], -FP[2]])])


def bench_ensemble(impl):
    starts = sample_ball(200, 0)
    impl.field_paths_rk4(
        FIELD.linear, FIELD.quad, FIELD.const, starts, 0.0, 1e-3, 200_000, 500,
        1e-10, 10, 1e-9, 0.0, False,
    )


def bench_discriminate(impl):
    rng = np.random.default_rng(1)
    eps = 2.0**-10
    axis = np.array([1.0, 0.0, 1.0]) / np.sqrt(2)
    starts = (rng.integers(0, 2, 500)[:, None] * 2 - 1) * (eps / 2) * axis
    starts = starts + 2.0**-13 * rng.standard_normal((500, 3))
    impl.field_first_entry(
        FIELD.linear, FIELD.quad, FIELD.const, starts, 1e-3, 400_000, 1e-9, TARGETS, 0.1
    )


def bench_master_equation(impl):
    rng = np.random.default_rng(2)
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    lm = (a - np.conj(a.T)) / 2
    b = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    b = (b + np.conj(b.T)) / 2
    ls = np.stack([lm - 0.5 * np.conj(b.T) @ b])
    zw = np.array([1.0])
    jw = np.array([1.0])
    bs = np.stack([b])
    df0 = zw[0] * (ls[0] + np.conj(ls[0].T)) + jw[0] * np.conj(bs[0].T) @ bs[0]
    r0s = sample_ball(40, 3) * 0.9
    x0s = np.stack(
        [
            0.5
            * (
                np.eye(2)
                + r[0] * np.array([[0, 1], [1, 0]])
                + r[1] * np.array([[0, -1j], [1j, 0]])
                + r[2] * np.array([[1, 0], [0, -1]])
            )
            for r in r0s
        ]
    ).astype(np.complex128)
    impl.nino_paths_rk4(x0s, zw, ls, jw, bs, df0, 0.0, 1e-3, 10_000, 1000, 1e-12, 10, 1e-9, False)


BENCHES = [
    ("ensemble (200 traj, t=200)", bench_ensemble),
    ("discriminate (500 decisions)", bench_discriminate),
    ("master-eq (40 traj, t=10)", bench_master_equation),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    impls = {}
    for name in ("numba", "numpy"):
        try:
            impls[name] = backend_module(name)
        except ImportError:
            print(f"backend {name} unavailable, skipping")
    if "numba" in impls:
        impls["numba"].warmup()

    print(f"{'workload':<32}" + "".join(f"{n:>12}" for n in impls) + f"{'speedup':>10}")
    for label, fn in BENCHES:
        best = {}
        for name, impl in impls.items():
            times = []
            for _ in range(args.repeats):
                t0 = time.perf_counter()
                fn(impl)
                times.append(time.perf_counter() - t0)
            best[name] = min(times)
        row = f"{label:<32}" + "".join(f"{best[n]:>11.3f}s" for n in impls)
        if len(best) == 2:
            row += f"{best['numpy'] / best['numba']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
