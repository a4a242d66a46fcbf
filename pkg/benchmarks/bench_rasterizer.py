"""Benchmark the rasterizer's compiled (numba) kernels against the
pure-Python fallback on the same random splat set.

Usage: python benchmarks/bench_rasterizer.py [--splats N] [--size WxH]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from objsplat.accel import USE_NUMBA
from objsplat.raster import kernels
from objsplat.raster.forward import _bin_splats, conics_from_cov2d
from objsplat.raster.projection import ProjectedSplats


def random_splats(n: int, width: int, height: int, seed: int = 0) -> ProjectedSplats:
    rng = np.random.default_rng(seed)
    means2d = rng.uniform([0, 0], [width, height], size=(n, 2))
    a = rng.uniform(2.0, 12.0, n)
    c = rng.uniform(2.0, 12.0, n)
    b = rng.uniform(-0.5, 0.5, n) * np.sqrt(a * c)
    cov2d = np.stack([a, b, c], axis=1)
    radii = np.ceil(3 * np.sqrt(np.maximum(a, c))).astype(np.int64)
    channels = rng.uniform(0, 1, size=(n, 7))
    return ProjectedSplats(
        means2d=means2d,
        cov2d=cov2d,
        depths=rng.uniform(1.0, 10.0, n),
        radii=radii,
        opacities=rng.uniform(0.2, 0.9, n),
        channels=channels,
        prim_index=np.arange(n),
    )


def run_forward(kernel, splats, width, height, tile_size=16):
    sorted_splats, tile_range, n_tiles_x = _bin_splats(splats, width, height, tile_size)
    out = np.zeros((height, width, splats.channels.shape[1]))
    final_t = np.ones((height, width))
    n_contrib = np.zeros((height, width), dtype=np.int64)
    t0 = time.perf_counter()
    kernel(
        splats.means2d, conics_from_cov2d(splats.cov2d), splats.opacities,
        splats.channels, sorted_splats, tile_range, n_tiles_x, tile_size,
        width, height, 1.0 / 255.0, 1e-4, out, final_t, n_contrib,
    )
    return time.perf_counter() - t0, out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--splats", type=int, default=5000)
    parser.add_argument("--size", default="256x256")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    width, height = (int(x) for x in args.size.split("x"))

    splats = random_splats(args.splats, width, height)
    print(f"{args.splats} splats at {width}x{height}; numba available: {USE_NUMBA}")

    # warm up compilation before timing
    if USE_NUMBA:
        run_forward(kernels.tile_forward, splats, width, height)

    results = {}
    for label, kernel in (
        ("numba" if USE_NUMBA else "python (numba disabled)", kernels.tile_forward),
        ("python", kernels.tile_forward_py),
    ):
        best, out = min(
            (run_forward(kernel, splats, width, height) for _ in range(args.repeats)),
            key=lambda r: r[0],
        )
        results[label] = (best, out)
        print(f"  forward {label:<24s} {best * 1e3:9.2f} ms")

    outputs = [out for _, out in results.values()]
    identical = all(np.array_equal(outputs[0], o) for o in outputs[1:])
    print(f"  outputs bitwise identical: {identical}")
    if USE_NUMBA:
        times = [t for t, _ in results.values()]
        print(f"  speedup: {times[1] / times[0]:.1f}x")


if __name__ == "__main__":
    main()
