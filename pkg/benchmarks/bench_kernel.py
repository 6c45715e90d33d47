"""Throughput of the compiled and pure-numpy batch kernels.

Usage: python benchmarks/bench_kernel.py [--images N] [--n-out N] [--repeat R]

Runs identical learning batches through every available backend, checks that
they agree, and prints the median wall time per batch and images per second.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from dgfefet.plasticity import StdpParams
from dgfefet.snn import LifParams, available, encode_batch, init_topology, simulate


def bench(backend: str, raster, lif, n_out: int, repeat: int):
    times, out = [], None
    for _ in range(repeat):
        topo = init_topology(n_out, seed=0)
        t = time.perf_counter()
        out = simulate(topo, raster, lif, StdpParams(), adapt=True, backend=backend)
        times.append(time.perf_counter() - t)
    return statistics.median(times), out


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--images", type=int, default=16, help="images per lockstep batch")
    p.add_argument("--n-out", type=int, default=100)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    rng = np.random.default_rng(0)
    lif = LifParams()
    raster = encode_batch(rng.integers(0, 256, (args.images, 28, 28)), lif, rng)
    results = {b: bench(b, raster, lif, args.n_out, args.repeat) for b in available()}

    print(f"batch of {args.images} images, 784 -> {args.n_out}, {lif.n_steps} steps, median of {args.repeat}")
    for name, (sec, _) in results.items():
        print(f"  {name:7s} {1e3 * sec:9.1f} ms/batch  {args.images / sec:8.1f} images/s")
    if len(results) == 2:
        (t_py, o_py), (t_cy, o_cy) = results["python"], results["cython"]
        same = np.array_equal(o_py.counts, o_cy.counts) and np.allclose(o_py.dw, o_cy.dw, rtol=1e-12, atol=1e-15)
        print(f"  speed-up {t_py / t_cy:.1f}x, outputs identical: {same}")


if __name__ == "__main__":
    main()
