"""Ring cavity: lumped elements, one round trip, and iteration to steady state."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from dmdark.analysis import EXTINCT_ENERGY, estimate_background, find_dark_pulses
from dmdark.fiber import (
    DerivedCoefficients,
    FiberSegment,
    StepControl,
    derive_coefficients,
    propagate_segment,
)
from dmdark.grid import TimeGrid, VectorField, init_black_soliton, init_cw_with_dip, make_grid, total_energy

log = logging.getLogger(__name__)

EDF_LENGTH_M = 5.0
DCF_LENGTH_M = 5.2
SMF_LENGTH_M = 8.0


def default_segments(smf_length_m: float = SMF_LENGTH_M, gain: float = 485.0) -> tuple:
    """EDF -> SMF -> DCF with the reference parameter set (lengths in m)."""
    return (
        FiberSegment("EDF", EDF_LENGTH_M * 1e-3, -32.0, small_signal_gain=gain),
        FiberSegment("SMF", smf_length_m * 1e-3, 18.0),
        FiberSegment("DCF", DCF_LENGTH_M * 1e-3, -2.0),
    )


INITIAL_SHAPES = ("sech_dip", "black_soliton")


@dataclass(frozen=True)
class InitialCondition:
    """Starting field: CW per component with one dip at t = 0, plus noise.

    ``shape="sech_dip"`` is a real sech dip of ``dip_depth``;
    ``"black_soliton"`` is a tanh of width ``dip_width`` with a pi phase
    jump (``dip_depth`` is unused).
    """

    cw_power: float = 0.1  # W
    dip_depth: float = 0.5
    dip_width: float = 2.0  # ps
    noise_amplitude: float | None = None  # sqrt(W); None -> 1e-3 of CW amplitude
    shape: str = "sech_dip"

    def __post_init__(self):
        if self.shape not in INITIAL_SHAPES:
            raise ValueError(f"shape must be one of {INITIAL_SHAPES}, got {self.shape!r}")

    def build(self, grid: TimeGrid, seed: int) -> VectorField:
        if self.shape == "black_soliton":
            return init_black_soliton(grid, self.cw_power, self.dip_width, self.noise_amplitude, seed)
        return init_cw_with_dip(
            grid, self.cw_power, self.dip_depth, self.dip_width, self.noise_amplitude, seed
        )


@dataclass(frozen=True)
class CavityConfig:
    """Everything needed to iterate the ring map.

    Angles are in rad. ``noise_per_trip`` (sqrt(W), 0 disables) adds seeded
    complex white noise after every round trip. ``initial`` describes the
    starting field used by sweeps and the command line.
    """

    segments: tuple = field(default_factory=default_segments)
    polarizer_angle: float = 0.13 * math.pi
    phase_bias: float = 1.6 * math.pi
    coupler_out: float = 0.5
    lambda0: float = 1565.0  # nm
    n_samples: int = 8192
    window: float = 200.0  # ps
    step: StepControl = field(default_factory=StepControl)
    max_round_trips: int = 2000
    convergence_tol: float = 1e-5
    stable_trips: int = 50
    depth_threshold: float = 0.2
    noise_per_trip: float = 0.0
    initial: InitialCondition = field(default_factory=InitialCondition)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not 0 < self.coupler_out < 1:
            raise ValueError(f"coupler_out must lie in (0, 1), got {self.coupler_out}")
        if not any(s.small_signal_gain > 0 for s in self.segments):
            raise ValueError("at least one segment needs small_signal_gain > 0")
        if self.max_round_trips < 1:
            raise ValueError("max_round_trips must be >= 1")
        if self.stable_trips < 1:
            raise ValueError("stable_trips must be >= 1")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be > 0")
        if not 0 < self.depth_threshold < 1:
            raise ValueError("depth_threshold must lie in (0, 1)")
        if self.noise_per_trip < 0:
            raise ValueError("noise_per_trip must be >= 0")
        make_grid(self.n_samples, self.window)  # validates

    @property
    def grid(self) -> TimeGrid:
        return make_grid(self.n_samples, self.window)

    @property
    def total_length_m(self) -> float:
        return 1e3 * sum(s.length for s in self.segments)

    def segment(self, name: str) -> FiberSegment:
        for s in self.segments:
            if s.name == name:
                return s
        raise KeyError(name)

    def replace_segment(self, name: str, **changes) -> "CavityConfig":
        segs = tuple(
            dataclasses.replace(s, **changes) if s.name == name else s for s in self.segments
        )
        self.segment(name)
        return dataclasses.replace(self, segments=segs)

    def with_smf_length(self, length_m: float) -> "CavityConfig":
        return self.replace_segment("SMF", length=length_m * 1e-3)

    def with_gain(self, gain: float) -> "CavityConfig":
        segs = tuple(
            dataclasses.replace(s, small_signal_gain=gain) if s.small_signal_gain > 0 else s
            for s in self.segments
        )
        return dataclasses.replace(self, segments=segs)

    def coefficients(self) -> list[DerivedCoefficients]:
        total = self.total_length_m
        return [derive_coefficients(s, self.lambda0, total) for s in self.segments]


def net_dispersion(cfg: CavityConfig) -> float:
    """Path-summed beta2 * L over all segments, in ps^2."""
    return sum(c.beta2 * s.length for c, s in zip(cfg.coefficients(), cfg.segments))


def apply_polarizer(f: VectorField, phi: float) -> VectorField:
    """Project (u, v) onto the unit axis (cos phi, sin phi)."""
    c, s = math.cos(phi), math.sin(phi)
    a = f.u * c + f.v * s
    return VectorField(f.grid, a * c, a * s)


def apply_phase_bias(f: VectorField, delta_phi: float) -> VectorField:
    """Linear phase delay ``delta_phi`` of v relative to u."""
    return VectorField(f.grid, f.u, f.v * np.exp(1j * delta_phi))


def apply_coupler(f: VectorField, out_fraction: float) -> tuple[VectorField, VectorField]:
    """Split into (kept, emitted) with power fractions 1 - out_fraction, out_fraction."""
    if not 0 < out_fraction < 1:
        raise ValueError(f"out_fraction must lie in (0, 1), got {out_fraction}")
    return f.scaled(math.sqrt(1 - out_fraction)), f.scaled(math.sqrt(out_fraction))


def round_trip(
    f: VectorField, cfg: CavityConfig, rng: np.random.Generator | None = None
) -> tuple[VectorField, VectorField]:
    """Polarizer -> phase bias -> fibers -> output coupler.

    Returns ``(intracavity field after the coupler, emitted field)``.
    """
    f = apply_polarizer(f, cfg.polarizer_angle)
    f = apply_phase_bias(f, cfg.phase_bias)
    for seg, coeff in zip(cfg.segments, cfg.coefficients()):
        f = propagate_segment(f, seg, coeff, cfg.step)
    kept, emitted = apply_coupler(f, cfg.coupler_out)
    if cfg.noise_per_trip > 0 and rng is not None:
        n = f.grid.n_samples
        scale = cfg.noise_per_trip / math.sqrt(2)
        noise = scale * (rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n)))
        kept = VectorField(f.grid, kept.u + noise[0], kept.v + noise[1])
    return kept, emitted


@dataclass
class RoundTripTrace:
    """Per-trip record of a cavity run."""

    energy: list = field(default_factory=list)  # pJ, intracavity after coupler
    cw_level: list = field(default_factory=list)  # W
    residual: list = field(default_factory=list)
    pulse_counts: list = field(default_factory=list)
    pulse_positions: list = field(default_factory=list)  # ps, per trip
    snapshots: dict = field(default_factory=dict)  # trip -> VectorField
    status: str = "running"  # converged | extinguished | max_trips

    def __len__(self) -> int:
        return len(self.energy)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def amplitude_residual(f_new: VectorField, f_old: VectorField) -> float:
    """||sqrt(P_new) - sqrt(P_old)|| / ||f_new||, insensitive to phase."""
    a_new = np.sqrt(f_new.power)
    norm = np.linalg.norm(a_new)
    if norm == 0:
        return 0.0
    return float(np.linalg.norm(a_new - np.sqrt(f_old.power)) / norm)


def run_to_steady_state(
    f0: VectorField,
    cfg: CavityConfig,
    seed: int = 0,
    snapshot_every: int = 0,
    callback: Callable[[int, VectorField, RoundTripTrace], None] | None = None,
) -> tuple[VectorField, RoundTripTrace]:
    """Iterate :func:`round_trip` until the amplitude profile settles.

    Stops after ``cfg.stable_trips`` consecutive trips with residual below
    ``cfg.convergence_tol``, when the energy falls below the extinction
    level, or at ``cfg.max_round_trips``. ``snapshot_every > 0`` stores the
    field every that many trips plus the last one.
    """
    rng = np.random.default_rng([seed, 1]) if cfg.noise_per_trip > 0 else None
    trace = RoundTripTrace()
    f = f0
    quiet = 0
    for k in range(1, cfg.max_round_trips + 1):
        f_next, _ = round_trip(f, cfg, rng)
        energy = total_energy(f_next)
        power = f_next.power
        r = amplitude_residual(f_next, f)
        pulses = find_dark_pulses(f_next, cfg.depth_threshold) if energy > EXTINCT_ENERGY else []
        trace.energy.append(energy)
        trace.cw_level.append(estimate_background(power))
        trace.residual.append(r)
        trace.pulse_counts.append(len(pulses))
        trace.pulse_positions.append(tuple(p.position for p in pulses))
        if snapshot_every and k % snapshot_every == 0:
            trace.snapshots[k] = f_next
        f = f_next
        if callback is not None:
            callback(k, f, trace)
        if energy <= EXTINCT_ENERGY:
            trace.status = "extinguished"
            break
        quiet = quiet + 1 if r < cfg.convergence_tol else 0
        if quiet >= cfg.stable_trips:
            trace.status = "converged"
            break
    else:
        trace.status = "max_trips"
    if snapshot_every and len(trace) not in trace.snapshots:
        trace.snapshots[len(trace)] = f
    log.debug("run finished: %s after %d trips", trace.status, len(trace))
    return f, trace
