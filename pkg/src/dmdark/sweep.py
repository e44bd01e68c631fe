"""Parameter sweeps over (SMF length, gain) and gain-threshold bisection."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Iterable

from dmdark.analysis import classify
from dmdark.cavity import CavityConfig, net_dispersion, run_to_steady_state

log = logging.getLogger(__name__)

DEFAULT_SMF_LENGTHS = (0.0, 2.0, 4.0, 6.0, 7.6, 8.0, 9.0, 10.0)  # m
DEFAULT_GAINS = tuple(400.0 + k * 250.0 / 7 for k in range(8))  # 1/km, 400..650
DARK_LABELS = ("single_dark", "multiple_dark")


class BracketError(ValueError):
    """The gain bracket does not straddle the single-pulse boundary."""


@dataclass(frozen=True)
class SweepSpec:
    """A rectangular (SMF length, gain) grid run from the standard initial dip.

    ``base`` supplies every other setting. Each (length, gain, seed) cell is
    an independent run, so the map does not depend on ``workers``.
    """

    smf_lengths: tuple = DEFAULT_SMF_LENGTHS
    gains: tuple = DEFAULT_GAINS
    base: CavityConfig = field(default_factory=lambda: CavityConfig(max_round_trips=2000))
    seeds: tuple = (0,)
    workers: int = 1

    def __post_init__(self):
        for name in ("smf_lengths", "gains", "seeds"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        if any(not m >= 0 for m in self.smf_lengths):
            raise ValueError("smf_lengths must all be >= 0")
        if any(not g > 0 for g in self.gains):
            raise ValueError("gains must all be > 0")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")

    def cells(self) -> list[tuple[float, float, int]]:
        return [(m, g, s) for m in self.smf_lengths for g in self.gains for s in self.seeds]

    def cell_config(self, smf_length_m: float, gain: float) -> CavityConfig:
        return self.base.with_smf_length(smf_length_m).with_gain(gain)


@dataclass(frozen=True)
class CellResult:
    smf_length_m: float
    gain_per_km: float
    seed: int
    net_dispersion_ps2: float
    label: str
    pulse_count: int = 0
    depth_max: float = float("nan")
    fwhm_ps: float = float("nan")  # of the deepest pulse
    bandwidth_nm: float = float("nan")
    cw_level: float = float("nan")
    trips: int = 0
    status: str = ""
    pulses: tuple = ()  # (position, fwhm, depth) per pulse
    error: str = ""

    @property
    def key(self) -> tuple[float, float, int]:
        return (self.smf_length_m, self.gain_per_km, self.seed)


@dataclass(frozen=True)
class RegionMap:
    """Sweep outcome, one :class:`CellResult` per cell, sorted by key."""

    cells: tuple

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(sorted(self.cells, key=lambda c: c.key)))

    def __len__(self) -> int:
        return len(self.cells)

    def cell(self, smf_length_m: float, gain: float, seed: int | None = None) -> CellResult:
        for c in self.cells:
            if (
                math.isclose(c.smf_length_m, smf_length_m, abs_tol=1e-9)
                and math.isclose(c.gain_per_km, gain, abs_tol=1e-9)
                and (seed is None or c.seed == seed)
            ):
                return c
        raise KeyError((smf_length_m, gain, seed))

    @property
    def smf_lengths(self) -> list[float]:
        return sorted({c.smf_length_m for c in self.cells})

    @property
    def gains(self) -> list[float]:
        return sorted({c.gain_per_km for c in self.cells})

    def column(self, smf_length_m: float) -> list[CellResult]:
        """Cells at one SMF length, ordered by gain."""
        return [c for c in self.cells if math.isclose(c.smf_length_m, smf_length_m, abs_tol=1e-9)]


def run_cell(
    base: CavityConfig,
    smf_length_m: float,
    gain: float,
    seed: int,
) -> CellResult:
    """Run one sweep cell from ``base.initial``; any exception becomes an ``"error"`` result."""
    cfg = base.with_smf_length(smf_length_m).with_gain(gain)
    d = net_dispersion(cfg)
    try:
        f0 = cfg.initial.build(cfg.grid, seed)
        f, trace = run_to_steady_state(f0, cfg, seed=seed)
        c = classify(trace, f, cfg.lambda0, cfg.depth_threshold, cfg.stable_trips)
    except Exception as exc:  # recorded, never fatal for the sweep
        log.warning("cell smf=%g gain=%g seed=%d failed: %s", smf_length_m, gain, seed, exc)
        return CellResult(smf_length_m, gain, seed, d, "error", error=f"{type(exc).__name__}: {exc}")
    deepest = max(c.pulses, key=lambda p: p.modulation_depth, default=None)
    return CellResult(
        smf_length_m,
        gain,
        seed,
        d,
        c.label,
        c.pulse_count,
        deepest.modulation_depth if deepest else float("nan"),
        deepest.fwhm if deepest else float("nan"),
        c.spectral_bw_3db,
        c.cw_level,
        len(trace),
        trace.status,
        tuple((p.position, p.fwhm, p.modulation_depth) for p in c.pulses),
    )


def _run_cell_args(args) -> CellResult:
    return run_cell(*args)


def run_sweep(
    spec: SweepSpec,
    skip: Iterable[tuple[float, float, int]] = (),
    on_result: Callable[[CellResult], None] | None = None,
) -> RegionMap:
    """Run every cell of ``spec`` not listed in ``skip``.

    ``on_result`` is called in the parent process as each cell finishes
    (completion order varies with ``workers``; the returned map does not).
    """
    skip = {(float(m), float(g), int(s)) for m, g, s in skip}
    todo = [c for c in spec.cells() if (float(c[0]), float(c[1]), int(c[2])) not in skip]
    jobs = [(spec.base, m, g, s) for m, g, s in todo]
    results = []

    def collect(r: CellResult):
        results.append(r)
        if on_result is not None:
            on_result(r)

    if spec.workers == 1 or len(jobs) <= 1:
        for job in jobs:
            collect(_run_cell_args(job))
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [pool.submit(_run_cell_args, job) for job in jobs]
            for fut in as_completed(futures):
                collect(fut.result())
    return RegionMap(tuple(results))


def bisect_gain(
    is_single: Callable[[float], bool], gain_lo: float, gain_hi: float, tol: float
) -> tuple[float, float]:
    """Shrink ``[gain_lo, gain_hi]`` around the point where ``is_single`` turns false.

    Returns the final bracket, whose width is at most ``tol``.
    """
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if not gain_lo < gain_hi:
        raise ValueError("gain_lo must be below gain_hi")
    if not is_single(gain_lo):
        raise BracketError(f"gain {gain_lo:g} does not give a single dark pulse")
    if is_single(gain_hi):
        raise BracketError(f"gain {gain_hi:g} still gives a single dark pulse")
    lo, hi = gain_lo, gain_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if is_single(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


def find_split_threshold(
    cfg: CavityConfig,
    gain_lo: float,
    gain_hi: float,
    tol: float,
    seed: int = 0,
) -> float:
    """Upper gain limit of the single dark pulse state, by bisection on full runs."""

    def is_single(gain: float) -> bool:
        r = run_cell(cfg, cfg.segment("SMF").length * 1e3, gain, seed)
        log.info("gain %.2f -> %s", gain, r.label)
        return r.label == "single_dark"

    lo, hi = bisect_gain(is_single, gain_lo, gain_hi, tol)
    return 0.5 * (lo + hi)


def formation_threshold(region: RegionMap, smf_length_m: float) -> float:
    """Lowest gain in a column whose final state holds a dark pulse (inf if none)."""
    for c in region.column(smf_length_m):
        if c.pulse_count > 0 and c.label != "error":
            return c.gain_per_km
    return math.inf


def single_dark_upper_boundary(region: RegionMap, smf_length_m: float) -> float | None:
    """Midpoint between the highest single_dark gain and the next gain above it.

    None when the column has no single_dark cell or it sits at the top gain.
    """
    col = region.column(smf_length_m)
    singles = [k for k, c in enumerate(col) if c.label == "single_dark"]
    if not singles or singles[-1] == len(col) - 1:
        return None
    k = singles[-1]
    return 0.5 * (col[k].gain_per_km + col[k + 1].gain_per_km)
