"""Split-step integration of the coupled two-polarization propagation equations.

For one fiber segment the envelopes obey::

    u_z =  i*b*u - d*u_t - i*beta2/2*u_tt + beta3/6*u_ttt
           + i*gamma*(|u|^2 + 2/3|v|^2)*u + i*gamma/3*v^2*conj(u)
           + g/2*u + g/(2*omega_g^2)*u_tt

and the mirror equation for v with b -> -b, d -> -d. Linear terms are
applied exactly in the frequency domain (numpy FFT convention, so
d/dt -> +i*omega), Kerr terms pointwise in the time domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from dmdark import kernels
from dmdark.grid import VectorField, total_energy

C_NM_PER_PS = 299792.458  # speed of light


class PropagationError(RuntimeError):
    """Non-finite field encountered during propagation."""

    def __init__(self, segment: str, z_km: float):
        super().__init__(
            f"non-finite field in segment {segment!r} at z = {z_km * 1e3:.4f} m"
        )
        self.segment = segment
        self.z_km = z_km


@dataclass(frozen=True)
class FiberSegment:
    """Physical parameters of one fiber piece.

    Parameters
    ----------
    name : str
        Label used in diagnostics and exports (e.g. ``"EDF"``).
    length : float
        Length in km.
    dispersion_D : float
        Engineer's dispersion parameter D in ps/(nm km).
    third_order_D : float
        Higher-order dispersion coefficient in ps^2/(nm km).
    gamma : float
        Kerr coefficient in 1/(W km).
    small_signal_gain : float
        Unsaturated power gain coefficient in 1/km, zero for passive fiber.
    sat_energy : float
        Gain saturation energy in pJ.
    gain_bandwidth : float
        Gain bandwidth in nm.
    beat_length_ratio : float
        Cavity length over beat length, L/L_b.
    """

    name: str
    length: float
    dispersion_D: float
    third_order_D: float = 0.1
    gamma: float = 3.0
    small_signal_gain: float = 0.0
    sat_energy: float = 500.0
    gain_bandwidth: float = 24.0
    beat_length_ratio: float = 0.01

    def __post_init__(self):
        if self.length < 0:
            raise ValueError(f"{self.name}: length must be >= 0, got {self.length}")
        if self.gamma < 0:
            raise ValueError(f"{self.name}: gamma must be >= 0, got {self.gamma}")
        if self.small_signal_gain < 0:
            raise ValueError(
                f"{self.name}: small_signal_gain must be >= 0, got {self.small_signal_gain}"
            )
        if self.small_signal_gain > 0 and self.sat_energy <= 0:
            raise ValueError(f"{self.name}: sat_energy must be > 0 for a gain fiber")
        if self.gain_bandwidth <= 0:
            raise ValueError(f"{self.name}: gain_bandwidth must be > 0")


KERR_METHODS = ("rk4", "exact")


@dataclass(frozen=True)
class StepControl:
    """Split-step settings.

    ``kerr`` selects the pointwise Kerr integrator: ``"rk4"`` (classical RK4
    with ``substeps`` sub-steps) or ``"exact"`` (closed form in the circular
    polarization basis).
    """

    step_size: float = 1e-4  # km
    substeps: int = 4
    kerr: str = "rk4"

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError(f"step_size must be > 0, got {self.step_size}")
        if self.substeps < 1:
            raise ValueError(f"substeps must be >= 1, got {self.substeps}")
        if self.kerr not in KERR_METHODS:
            raise ValueError(f"kerr must be one of {KERR_METHODS}, got {self.kerr!r}")


@dataclass(frozen=True)
class DerivedCoefficients:
    beta2: float  # ps^2/km, positive = normal dispersion
    beta3: float  # ps^3/km
    beta_bi: float  # rad/km
    delta: float  # ps/km
    omega_g: float  # rad/ps


def d_to_beta(d: float, lambda0: float) -> float:
    """Scale a D-type coefficient by lambda0^2 / (2 pi c)."""
    return d * lambda0**2 / (2 * math.pi * C_NM_PER_PS)


def derive_coefficients(
    seg: FiberSegment, lambda0: float = 1565.0, total_cavity_length: float = 18.2
) -> DerivedCoefficients:
    """Convert engineering parameters to propagation coefficients.

    ``lambda0`` is in nm, ``total_cavity_length`` in m (the beat length is
    ``total_cavity_length / beat_length_ratio``).
    """
    if lambda0 <= 0:
        raise ValueError(f"lambda0 must be positive, got {lambda0}")
    beta2 = -d_to_beta(seg.dispersion_D, lambda0)
    beta3 = d_to_beta(seg.third_order_D, lambda0)
    if seg.beat_length_ratio > 0 and total_cavity_length > 0:
        beat_length_km = total_cavity_length * 1e-3 / seg.beat_length_ratio
        beta_bi = math.pi / beat_length_km
    else:
        beta_bi = 0.0
    delta = beta_bi * lambda0 / (2 * math.pi * C_NM_PER_PS)
    omega_g = 2 * math.pi * C_NM_PER_PS / lambda0**2 * seg.gain_bandwidth
    return DerivedCoefficients(beta2, beta3, beta_bi, delta, omega_g)


def linear_exponent(omega: np.ndarray, coeff: DerivedCoefficients, g: float) -> np.ndarray:
    """Per-km spectral exponent, shape (2, n): row 0 for u, row 1 for v."""
    w = omega
    common = (
        0.5j * coeff.beta2 * w**2
        - (1j / 6.0) * coeff.beta3 * w**3
        + 0.5 * g
        - 0.5 * g * w**2 / coeff.omega_g**2
    )
    birefringence = 1j * coeff.beta_bi - 1j * coeff.delta * w
    return np.stack([common + birefringence, common - birefringence])


def linear_step(f: VectorField, coeff: DerivedCoefficients, g: float, h: float) -> VectorField:
    """Apply all linear terms exactly over a distance ``h`` km."""
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    prop = np.exp(h * linear_exponent(f.grid.omega, coeff, g))
    a = sfft.ifft(sfft.fft(f.stacked(), axis=-1) * prop, axis=-1)
    return VectorField(f.grid, a[0], a[1])


def nonlinear_step(
    f: VectorField, gamma: float, h: float, substeps: int = 4, method: str = "rk4"
) -> VectorField:
    """Integrate the Kerr terms pointwise over ``h`` km.

    With v identically zero this is the exact SPM rotation
    ``u * exp(i gamma |u|^2 h)``; likewise with u zero.
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    a = f.stacked()
    _kerr_inplace(a, gamma, h, substeps, method)
    return VectorField(f.grid, a[0], a[1])


def _kerr_inplace(a: np.ndarray, gamma: float, h: float, substeps: int, method: str) -> None:
    u, v = a[0], a[1]
    if not v.any():
        kernels.spm_phase(u, gamma, h)
    elif not u.any():
        kernels.spm_phase(v, gamma, h)
    elif method == "exact":
        kernels.coupled_kerr_exact(u, v, gamma, h)
    else:
        kernels.coupled_kerr_rk4(u, v, gamma, h, substeps)


def saturated_gain(seg: FiberSegment, f_in: VectorField) -> float:
    """Energy-saturated gain ``g0 * exp(-E / E_sat)`` in 1/km."""
    if seg.small_signal_gain == 0:
        return 0.0
    return seg.small_signal_gain * math.exp(-total_energy(f_in) / seg.sat_energy)


def n_steps(length: float, step_size: float) -> int:
    return max(1, math.ceil(length / step_size - 1e-9))


def propagate_segment(
    f: VectorField,
    seg: FiberSegment,
    coeff: DerivedCoefficients,
    ctl: StepControl,
    g: float | None = None,
) -> VectorField:
    """Propagate ``f`` through ``seg`` with the symmetric split-step scheme.

    The gain is evaluated once at segment entry unless ``g`` is given.
    Adjacent linear half steps are merged, so each step costs one FFT pair.
    """
    if seg.length == 0:
        return f
    if g is None:
        g = saturated_gain(seg, f)
    n = n_steps(seg.length, ctl.step_size)
    h = seg.length / n
    expo = linear_exponent(f.grid.omega, coeff, g)
    # overflow is caught explicitly below and reported with its position
    with np.errstate(over="ignore", invalid="ignore"):
        half = np.exp(0.5 * h * expo)
        full = half * half
        spec = sfft.fft(f.stacked(), axis=-1) * half
        for k in range(n):
            a = sfft.ifft(spec, axis=-1)
            if seg.gamma:
                _kerr_inplace(a, seg.gamma, h, ctl.substeps, ctl.kerr)
            spec = sfft.fft(a, axis=-1)
            spec *= full if k < n - 1 else half
            if not np.isfinite(spec.sum()):
                raise PropagationError(seg.name, (k + 1) * h)
    a = sfft.ifft(spec, axis=-1)
    return VectorField(f.grid, a[0], a[1])
