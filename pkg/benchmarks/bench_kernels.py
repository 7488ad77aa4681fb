#!/usr/bin/env python3
"""Benchmark the element kernels: compiled (Cython) backend vs the numpy
fallback.

The p-energy and p-gradient sweeps are the hot loop of the eigenpair
solvers: every Armijo trial evaluates the functional, every iteration the
gradient. Run:

    python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from p2lab._kernels import pykernels
from p2lab.assembly import _element_geometry
from p2lab.mesh import build_interval_mesh, build_rectangle_mesh

try:
    from p2lab._kernels import ckernels
except ImportError:
    ckernels = None


def _time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def bench_case(name, mesh, p, repeats):
    conn, bgrads, meas = _element_geometry(mesh)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(mesh.n_nodes)
    ne = mesh.n_elements

    backends = [("numpy", pykernels)]
    if ckernels is not None:
        backends.append(("cython", ckernels))

    rows = []
    for label, impl in backends:
        t_energy = _time(lambda: impl.p_energy_raw(conn, bgrads, meas, u, p),
                         repeats)

        def run_gradient():
            out = np.zeros(mesh.n_nodes)
            impl.p2_gradient(conn, bgrads, meas, u, p, 0.0, 1.0, 1.0, out)

        t_grad = _time(run_gradient, repeats)
        rows.append((label, t_energy, t_grad))

    print(f"\n{name}  ({ne} elements, p = {p})")
    print(f"  {'backend':8s} {'energy':>12s} {'gradient':>12s} "
          f"{'energy ns/elem':>15s} {'grad ns/elem':>14s}")
    for label, t_e, t_g in rows:
        print(f"  {label:8s} {t_e * 1e3:10.3f}ms {t_g * 1e3:10.3f}ms "
              f"{t_e / ne * 1e9:15.1f} {t_g / ne * 1e9:14.1f}")
    if len(rows) == 2:
        print(f"  speedup: energy x{rows[0][1] / rows[1][1]:.1f}, "
              f"gradient x{rows[0][2] / rows[1][2]:.1f}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    if ckernels is None:
        print("note: compiled extension unavailable; timing the fallback only")

    bench_case("1D interval", build_interval_mesh(200_000, 1.0), 1.5, args.repeats)
    bench_case("1D interval", build_interval_mesh(200_000, 1.0), 3.0, args.repeats)
    bench_case("2D rectangle", build_rectangle_mesh(300, 300, 1.0, 1.0), 1.5,
               args.repeats)
    bench_case("2D rectangle", build_rectangle_mesh(300, 300, 1.0, 1.0), 3.0,
               args.repeats)


if __name__ == "__main__":
    main()
