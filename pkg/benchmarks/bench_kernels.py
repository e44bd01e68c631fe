"""Timing of the compiled Kerr kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--n 8192] [--repeat 20]

Each kernel is checked for agreement between the backends before it is
timed. The last block times a full EDF segment propagation, where the FFTs
dominate and the kernel choice matters less.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

import dmdark.kernels as active
from dmdark import _kernels_py as py
from dmdark.cavity import CavityConfig
from dmdark.fiber import StepControl, propagate_segment
from dmdark.grid import VectorField, make_grid

try:
    from dmdark import _kernels as cy
except ImportError:  # extension not built
    cy = None

NAMES = ("coupled_kerr_exact", "coupled_kerr_rk4", "spm_phase")


def sample_field(n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    u = rng.normal(size=n) + 1j * rng.normal(size=n)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return u, v


def best_of(fn, repeat: int) -> float:
    """Best wall time of one call in seconds."""
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_calls(mod, u, v):
    return {
        "coupled_kerr_exact": lambda: mod.coupled_kerr_exact(u, v, 3.0, 2e-3),
        "coupled_kerr_rk4": lambda: mod.coupled_kerr_rk4(u, v, 3.0, 2e-3, 4),
        "spm_phase": lambda: mod.spm_phase(u, 3.0, 2e-3),
    }


def check_agreement(n: int) -> float:
    worst = 0.0
    for name in NAMES:
        outs = []
        for mod in (py, cy):
            u, v = sample_field(n)
            kernel_calls(mod, u, v)[name]()
            outs.append(np.concatenate([u, v]))
        worst = max(worst, float(np.max(np.abs(outs[0] - outs[1]))))
    return worst


def time_segment(mod, n: int, repeat: int, kerr: str) -> float:
    for name in NAMES:
        setattr(active, name, getattr(mod, name))
    cfg = CavityConfig(n_samples=n)
    seg = cfg.segment("EDF")
    coeff = cfg.coefficients()[cfg.segments.index(seg)]
    grid = make_grid(n, cfg.window)
    u, v = sample_field(n)
    f = VectorField(grid, 0.5 * u, 0.5 * v)
    ctl = StepControl(1e-4, kerr=kerr)
    return best_of(lambda: propagate_segment(f, seg, coeff, ctl), max(3, repeat // 5))


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=8192, help="samples per component")
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args(argv)

    print(f"n = {args.n}, active backend: {active.BACKEND}")
    if cy is None:
        print("compiled extension not built; only the numpy timings are shown")
    else:
        print(f"max |cython - numpy| over all kernels: {check_agreement(args.n):.2e}")

    print(f"{'kernel':<22}{'numpy (us)':>12}{'cython (us)':>13}{'speedup':>9}")
    for name in NAMES:
        t_py = best_of(kernel_calls(py, *sample_field(args.n))[name], args.repeat)
        if cy is None:
            print(f"{name:<22}{t_py * 1e6:>12.1f}")
            continue
        t_cy = best_of(kernel_calls(cy, *sample_field(args.n))[name], args.repeat)
        print(f"{name:<22}{t_py * 1e6:>12.1f}{t_cy * 1e6:>13.1f}{t_py / t_cy:>8.1f}x")

    saved = {name: getattr(active, name) for name in NAMES}
    try:
        for kerr in ("rk4", "exact"):
            label = f"EDF segment ({kerr})"
            t_py = time_segment(py, args.n, args.repeat, kerr)
            if cy is None:
                print(f"{label:<22}{t_py * 1e3:>10.2f}ms")
                continue
            t_cy = time_segment(cy, args.n, args.repeat, kerr)
            print(f"{label:<22}{t_py * 1e3:>10.2f}ms{t_cy * 1e3:>11.2f}ms{t_py / t_cy:>8.1f}x")
    finally:
        for name, fn in saved.items():
            setattr(active, name, fn)


if __name__ == "__main__":
    main()
