"""Temporal grid, two-component optical field and binary snapshots.

Units throughout the package: time in ps, distance in km, power in W,
energy in pJ, angular frequency in rad/ps.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SNAPSHOT_MAGIC = b"VFLD"
SNAPSHOT_VERSION = 1
# magic, version, n_samples, window_ps, n_components
_HEADER = struct.Struct("<4sIQdI")


class SnapshotFormatError(ValueError):
    """Raised when a field snapshot file does not match the binary layout."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform periodic time window and its angular-frequency axis."""

    n_samples: int
    window: float

    def __post_init__(self):
        n = self.n_samples
        if not isinstance(n, (int, np.integer)) or n < 2 or n & (n - 1):
            raise ValueError(f"n_samples must be a power of two >= 2, got {n!r}")
        if not np.isfinite(self.window) or self.window <= 0:
            raise ValueError(f"window must be positive, got {self.window!r}")
        object.__setattr__(self, "n_samples", int(n))
        object.__setattr__(self, "window", float(self.window))

    @property
    def dt(self) -> float:
        return self.window / self.n_samples

    @property
    def t(self) -> np.ndarray:
        """Sample times in [-window/2, window/2)."""
        return (np.arange(self.n_samples) - self.n_samples // 2) * self.dt

    @property
    def omega(self) -> np.ndarray:
        """Angular frequencies in FFT ordering: 2*pi*k/window."""
        return 2 * np.pi * np.fft.fftfreq(self.n_samples, d=self.dt)

    @property
    def domega(self) -> float:
        return 2 * np.pi / self.window


def make_grid(n_samples: int, window: float) -> TimeGrid:
    """Build a :class:`TimeGrid` with ``n_samples`` points over ``window`` ps."""
    return TimeGrid(n_samples, window)


def _frozen(a, n: int, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.complex128, copy=True)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class VectorField:
    """Complex envelopes (u, v) of the two polarization components, in sqrt(W).

    The arrays are copied and made read-only on construction.
    """

    grid: TimeGrid
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.grid.n_samples
        object.__setattr__(self, "u", _frozen(self.u, n, "u"))
        object.__setattr__(self, "v", _frozen(self.v, n, "v"))

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "VectorField":
        z = np.zeros(grid.n_samples, dtype=np.complex128)
        return cls(grid, z, z)

    @property
    def power(self) -> np.ndarray:
        """Total instantaneous power |u|^2 + |v|^2 in W."""
        return np.abs(self.u) ** 2 + np.abs(self.v) ** 2

    def scaled(self, factor: complex) -> "VectorField":
        return VectorField(self.grid, self.u * factor, self.v * factor)

    def stacked(self) -> np.ndarray:
        """Writable (2, n) copy of [u, v]."""
        return np.stack([self.u, self.v])


def total_energy(f: VectorField) -> float:
    """Energy in pJ: sum of (|u|^2 + |v|^2) * dt."""
    return float(np.sum(f.power) * f.grid.dt)


def to_spectral(a: np.ndarray, dt: float) -> np.ndarray:
    """Continuous-transform approximation, dt * FFT, along the last axis."""
    return np.fft.fft(a, axis=-1) * dt


def from_spectral(a: np.ndarray, dt: float) -> np.ndarray:
    return np.fft.ifft(a, axis=-1) / dt


def spectrum(f: VectorField) -> tuple[np.ndarray, np.ndarray]:
    """Spectral energy densities of u and v over ``grid.omega`` (FFT order).

    Normalized so that ``sum(S) * domega / (2*pi)`` equals the time-domain
    energy of that component.
    """
    dt = f.grid.dt
    su = np.abs(to_spectral(f.u, dt)) ** 2
    sv = np.abs(to_spectral(f.v, dt)) ** 2
    return su, sv


def init_cw_with_dip(
    grid: TimeGrid,
    cw_power: float = 0.1,
    dip_depth: float = 0.5,
    dip_width: float = 2.0,
    noise_amplitude: float | None = None,
    seed: int = 0,
) -> VectorField:
    """CW background with a real sech-shaped dip at t = 0 plus seeded noise.

    ``u = (sqrt(cw_power) + noise) * (1 - dip_depth * sech(t / dip_width))``
    and v gets the same profile with an independent noise draw. The noise is
    complex white Gaussian with rms ``noise_amplitude`` (sqrt(W)); the default
    is 1e-3 of the CW amplitude.
    """
    if not 0.0 <= dip_depth <= 1.0:
        raise ValueError(f"dip_depth must lie in [0, 1], got {dip_depth}")
    if dip_width <= 0:
        raise ValueError(f"dip_width must be positive, got {dip_width}")
    if cw_power < 0:
        raise ValueError(f"cw_power must be non-negative, got {cw_power}")
    amp = np.sqrt(cw_power)
    if noise_amplitude is None:
        noise_amplitude = 1e-3 * amp
    profile = 1.0 - dip_depth / np.cosh(grid.t / dip_width)

    return _with_noise(grid, amp, profile, noise_amplitude, seed)


def _with_noise(grid: TimeGrid, amp: float, profile: np.ndarray, noise_amplitude: float, seed: int) -> VectorField:
    rng = np.random.default_rng(seed)
    n = grid.n_samples
    comps = []
    for _ in range(2):
        noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        comps.append((amp + noise_amplitude / np.sqrt(2) * noise) * profile)
    return VectorField(grid, comps[0], comps[1])


def init_black_soliton(
    grid: TimeGrid,
    cw_power: float = 0.1,
    width: float = 1.4,
    noise_amplitude: float | None = None,
    seed: int = 0,
) -> VectorField:
    """CW background with one black (tanh) dark soliton at t = 0.

    The pi phase jump of ``tanh(t / width)`` cannot close on a periodic
    window by itself, so the background carries a compensating linear phase
    ramp of -pi across the window (a frequency offset of pi / window). Noise
    is added as in :func:`init_cw_with_dip`.
    """
    if width <= 0:
        raise ValueError(f"width must be positive, got {width}")
    if cw_power < 0:
        raise ValueError(f"cw_power must be non-negative, got {cw_power}")
    amp = np.sqrt(cw_power)
    if noise_amplitude is None:
        noise_amplitude = 1e-3 * amp
    t = grid.t
    profile = np.tanh(t / width) * np.exp(-1j * np.pi * (t - t[0]) / grid.window)
    return _with_noise(grid, amp, profile, noise_amplitude, seed)


def write_snapshot(f: VectorField, path) -> None:
    """Write ``f`` in the little-endian binary snapshot layout (see README)."""
    n = f.grid.n_samples
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, n, f.grid.window, 2)
    body = np.empty(4 * n, dtype="<f8")
    body[0 : 2 * n : 2] = f.u.real
    body[1 : 2 * n : 2] = f.u.imag
    body[2 * n :: 2] = f.v.real
    body[2 * n + 1 :: 2] = f.v.imag
    Path(path).write_bytes(header + body.tobytes())


def read_snapshot(path) -> VectorField:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise SnapshotFormatError(
            f"{path}: {len(data)} bytes is shorter than the {_HEADER.size}-byte header"
        )
    magic, version, n, window, ncomp = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {magic!r}, expected {SNAPSHOT_MAGIC!r}")
    if version != SNAPSHOT_VERSION:
        raise SnapshotFormatError(f"{path}: unsupported version {version}")
    if ncomp != 2:
        raise SnapshotFormatError(f"{path}: expected 2 components, header says {ncomp}")
    expected = _HEADER.size + 16 * ncomp * n
    if len(data) != expected:
        raise SnapshotFormatError(
            f"{path}: size {len(data)} bytes, header (n_samples={n}) requires {expected}"
        )
    try:
        grid = TimeGrid(n, window)
    except ValueError as exc:
        raise SnapshotFormatError(f"{path}: invalid grid in header: {exc}") from exc
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    z = body[0::2] + 1j * body[1::2]
    try:
        return VectorField(grid, z[:n], z[n:])
    except ValueError as exc:
        raise SnapshotFormatError(f"{path}: {exc}") from exc
