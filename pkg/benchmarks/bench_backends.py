"""Throughput comparison: numba kernels vs the pure-numpy fallback.

Run:  python3 benchmarks/bench_backends.py

Shapes mirror a real training step: 512x8000 encoder activations,
512x2560 decoder activations, and multi-million-parameter optimizer
updates. Matrix products are identical in both backends (BLAS) and are
reported once for context.
"""

from __future__ import annotations

import time

import numpy as np

from cstune import _kernels_numba, _kernels_numpy

BACKENDS = {"numpy": _kernels_numpy, "numba": _kernels_numba}

ACT_SHAPES = [(512, 8000), (512, 2560), (96, 8000)]
PARAM_SIZES = [8_192_000, 6_553_600, 520_000]


def clock(fn, *args, repeats=20):
    fn(*args)  # warm (jit, caches)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats * 1000


def bench_activations():
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'shape':<14}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for shape in ACT_SHAPES:
        x = rng.standard_normal(shape)
        g = rng.standard_normal(shape)
        u = rng.random(shape)
        rows = {
            "leaky_relu_fwd": (lambda k, x=x: k.leaky_relu_fwd(x, 0.01)),
            "leaky_relu_bwd": (lambda k, x=x, g=g: k.leaky_relu_bwd(x, g, 0.01)),
            "dropout_fwd": (lambda k, x=x, u=u: k.dropout_fwd(x, u, 0.3)),
            "sigmoid_bce_elems": (lambda k, x=x: k.sigmoid_bce_elems(x, 1.0)),
        }
        for name, call in rows.items():
            times = {bk: clock(lambda k=kmod: call(k)) for bk, kmod in BACKENDS.items()}
            print(f"{name:<22}{str(shape):<14}{times['numpy']:>10.2f}{times['numba']:>10.2f}"
                  f"{times['numpy'] / times['numba']:>8.1f}x")


def bench_adamw():
    rng = np.random.default_rng(1)
    print(f"\n{'kernel':<22}{'params':<14}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for size in PARAM_SIZES:
        p = rng.standard_normal(size)
        g = rng.standard_normal(size)
        times = {}
        for bk, kmod in BACKENDS.items():
            pp, m, v = p.copy(), np.zeros(size), np.zeros(size)
            times[bk] = clock(
                lambda k=kmod, pp=pp, m=m, v=v: k.adamw_update(
                    pp, g, m, v, 1e-4, 0.9, 0.999, 1e-8, 0.01, 1
                ),
                repeats=10,
            )
        print(f"{'adamw_update':<22}{size:<14,}{times['numpy']:>10.2f}{times['numba']:>10.2f}"
              f"{times['numpy'] / times['numba']:>8.1f}x")


def bench_matmul_context():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((512, 8000))
    b = rng.standard_normal((8000, 1024))
    ms = clock(lambda: a @ b, repeats=5)
    gflops = 2 * 512 * 8000 * 1024 / (ms / 1000) / 1e9
    print(f"\nBLAS context: 512x8000 @ 8000x1024 = {ms:.1f} ms ({gflops:.0f} GFLOP/s),"
          " identical in both backends")


def check_agreement():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((64, 257))
    for name in ("leaky_relu_fwd", "softmax_rows", "logsumexp_rows"):
        a = getattr(_kernels_numpy, name)(x, 0.01) if name == "leaky_relu_fwd" else getattr(_kernels_numpy, name)(x)
        b = getattr(_kernels_numba, name)(x, 0.01) if name == "leaky_relu_fwd" else getattr(_kernels_numba, name)(x)
        worst = float(np.abs(np.asarray(a) - np.asarray(b)).max())
        print(f"agreement {name}: max abs diff {worst:.2e}")


if __name__ == "__main__":
    bench_activations()
    bench_adamw()
    bench_matmul_context()
    check_agreement()
