"""Dark-pulse detection, spectral observables and steady-state classification."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from dmdark.fiber import C_NM_PER_PS
from dmdark.grid import VectorField, spectrum, total_energy

LABELS = ("extinguished", "cw", "single_dark", "multiple_dark", "unstable", "not_converged")

EXTINCT_ENERGY = 1e-6  # pJ


@dataclass(frozen=True)
class DarkPulse:
    position: float  # ps
    fwhm: float  # ps
    modulation_depth: float  # 1 - P_min / P_bg
    phase_step: float = float("nan")  # rad, across the dip


@dataclass(frozen=True)
class StateClassification:
    label: str
    pulses: tuple[DarkPulse, ...] = field(default_factory=tuple)
    cw_level: float = 0.0  # W
    spectral_bw_3db: float = float("nan")  # nm
    bandwidth_grid_limited: bool = False
    tbp: float = float("nan")

    @property
    def pulse_count(self) -> int:
        return len(self.pulses)


def estimate_background(power: np.ndarray) -> float:
    """CW level as the median of the upper quartile of ``power``."""
    p = np.asarray(power, dtype=float)
    if p.size == 0:
        raise ValueError("empty power profile")
    upper = p[p >= np.percentile(p, 75)]
    return float(np.median(upper))


def _crossing(p: np.ndarray, start: int, step: int, level: float) -> float:
    """Fractional index where ``p`` first rises to ``level`` walking from ``start``."""
    n = p.size
    i = start
    for _ in range(n):
        j = i + step
        if j < 0 or j >= n:
            return float(i)
        if p[j] >= level:
            return i + step * (level - p[i]) / (p[j] - p[i])
        i = j
    return float(i)


def find_dark_pulses(
    f: VectorField, depth_threshold: float = 0.2, prominence: float | None = None
) -> list[DarkPulse]:
    """Locate dips in ``|u|^2 + |v|^2`` deeper than ``depth_threshold``.

    The profile is treated as periodic. ``prominence`` (fraction of the
    background) separates neighbouring dips from ripple; it defaults to half
    the depth threshold. Pulses are returned sorted by position.
    """
    if not 0 < depth_threshold < 1:
        raise ValueError(f"depth_threshold must lie in (0, 1), got {depth_threshold}")
    if prominence is None:
        prominence = 0.5 * depth_threshold
    p_full = f.power
    bg = estimate_background(p_full)
    if bg <= 0:
        return []
    n = p_full.size
    dt = f.grid.dt
    # rotate so the global maximum sits at index 0 and no dip straddles the edge
    shift = int(np.argmax(p_full))
    p = np.roll(p_full, -shift)
    idx, _ = find_peaks(-p, height=-bg * (1 - depth_threshold), prominence=prominence * bg)

    comp = f.u if np.sum(np.abs(f.u) ** 2) >= np.sum(np.abs(f.v) ** 2) else f.v
    comp = np.roll(comp, -shift)
    pulses = []
    for i in idx:
        pmin = p[i]
        depth = float(np.clip(1.0 - pmin / bg, 0.0, 1.0))
        half = 0.5 * (bg + pmin)
        left = _crossing(p, i, -1, half)
        right = _crossing(p, i, +1, half)
        fwhm = (right - left) * dt
        # parabolic refinement of the minimum position
        frac = 0.0
        if 0 < i < n - 1:
            denom = p[i - 1] - 2 * p[i] + p[i + 1]
            if denom > 0:
                frac = 0.5 * (p[i - 1] - p[i + 1]) / denom
        pos_index = (i + frac + shift) % n
        position = (pos_index - n // 2) * dt
        window = f.grid.window
        position = (position + window / 2) % window - window / 2
        span = max(2, int(round(2 * fwhm / dt)))
        lo, hi = max(0, i - span), min(n - 1, i + span)
        phase_step = float(np.angle(comp[hi] * np.conj(comp[lo]))) if comp[hi] and comp[lo] else float("nan")
        pulses.append(DarkPulse(float(position), float(fwhm), depth, phase_step))
    pulses.sort(key=lambda d: d.position)
    return pulses


def bandwidth_fwhm(values: np.ndarray, step: float) -> tuple[float, bool]:
    """Full width at half maximum of a sampled, centred profile.

    Returns ``(width, grid_limited)``; when only the peak sample exceeds half
    maximum the width is reported as one sample spacing.
    """
    y = np.asarray(values, dtype=float)
    k = int(np.argmax(y))
    peak = y[k]
    if peak <= 0:
        return float("nan"), True
    half = 0.5 * peak
    above = np.nonzero(y >= half)[0]
    lo, hi = above[0], above[-1]
    if lo == hi:
        return step, True
    left = float(lo)
    if lo > 0:
        left = lo - (y[lo] - half) / (y[lo] - y[lo - 1])
    right = float(hi)
    if hi < y.size - 1:
        right = hi + (y[hi] - half) / (y[hi] - y[hi + 1])
    return (right - left) * step, False


def omega_to_nm(domega: float, lambda0: float) -> float:
    return domega * lambda0**2 / (2 * np.pi * C_NM_PER_PS)


def spectral_bandwidth_3db_info(f: VectorField, lambda0: float) -> tuple[float, bool]:
    su, sv = spectrum(f)
    s = np.fft.fftshift(su + sv)
    width, limited = bandwidth_fwhm(s, f.grid.domega)
    return omega_to_nm(width, lambda0), limited


def spectral_bandwidth_3db(f: VectorField, lambda0: float) -> float:
    """Half-maximum width of the total power spectrum, in nm.

    A spectrum with a single bin above half maximum (e.g. pure CW) is
    grid-limited and reported as one bin width; see
    :func:`spectral_bandwidth_3db_info` for the flag.
    """
    return spectral_bandwidth_3db_info(f, lambda0)[0]


def time_bandwidth_product(fwhm: float, bw: float, lambda0: float) -> float:
    """FWHM duration (ps) times spectral FWHM (nm, converted to THz)."""
    if fwhm <= 0 or bw <= 0 or lambda0 <= 0:
        raise ValueError("fwhm, bw and lambda0 must be positive")
    return fwhm * C_NM_PER_PS * bw / lambda0**2


def _stable(counts, positions, grid) -> bool:
    """Constant pulse count and drift below one sample per trip."""
    if len(set(counts)) > 1:
        return False
    w = grid.window
    for prev, cur in zip(positions, positions[1:]):
        if len(prev) != len(cur):
            return False
        for a, b in zip(sorted(prev), sorted(cur)):
            if abs((b - a + w / 2) % w - w / 2) >= grid.dt:
                return False
    return True


def classify(
    trace,
    f_final: VectorField,
    lambda0: float = 1565.0,
    depth_threshold: float = 0.2,
    stability_window: int = 50,
) -> StateClassification:
    """Assign a steady-state label to a finished cavity run.

    ``trace`` is a :class:`dmdark.cavity.RoundTripTrace` (anything with
    ``status``, ``pulse_counts`` and ``pulse_positions`` works).
    """
    power = f_final.power
    cw = estimate_background(power)
    if trace.status == "extinguished" or total_energy(f_final) <= EXTINCT_ENERGY:
        return StateClassification("extinguished", (), cw)

    pulses = tuple(find_dark_pulses(f_final, depth_threshold))
    bw, limited = spectral_bandwidth_3db_info(f_final, lambda0)
    tbp = float("nan")
    if len(pulses) == 1 and not limited:
        tbp = time_bandwidth_product(pulses[0].fwhm, bw, lambda0)

    counts = list(trace.pulse_counts[-stability_window:])
    positions = list(trace.pulse_positions[-stability_window:])
    stable = _stable(counts, positions, f_final.grid)
    if trace.status != "converged":
        label = "unstable" if len(set(counts)) > 1 else "not_converged"
    elif not stable:
        label = "unstable"
    elif not pulses:
        label = "cw"
    elif len(pulses) == 1:
        label = "single_dark"
    else:
        label = "multiple_dark"
    return StateClassification(label, pulses, cw, bw, limited, tbp)
