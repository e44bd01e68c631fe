"""Pure numpy implementation of the Kerr kernels (fallback for ``_kernels``)."""

import numpy as np


def _kerr_rhs(u, v, gamma):
    au = u.real * u.real + u.imag * u.imag
    av = v.real * v.real + v.imag * v.imag
    du = 1j * gamma * ((au + (2.0 / 3.0) * av) * u + (1.0 / 3.0) * v * v * np.conj(u))
    dv = 1j * gamma * ((av + (2.0 / 3.0) * au) * v + (1.0 / 3.0) * u * u * np.conj(v))
    return du, dv


def coupled_kerr_rk4(u, v, gamma, h, nsub):
    """Integrate the coupled Kerr terms over ``h`` in place, ``nsub`` RK4 sub-steps.

    Samples where one component is exactly zero get the closed-form SPM phase
    rotation of the other instead.
    """
    if gamma == 0.0 or h == 0.0:
        return
    u_zero = u == 0
    v_zero = v == 0
    s = h / nsub
    uu = u.copy()
    vv = v.copy()
    for _ in range(nsub):
        k1u, k1v = _kerr_rhs(uu, vv, gamma)
        k2u, k2v = _kerr_rhs(uu + 0.5 * s * k1u, vv + 0.5 * s * k1v, gamma)
        k3u, k3v = _kerr_rhs(uu + 0.5 * s * k2u, vv + 0.5 * s * k2v, gamma)
        k4u, k4v = _kerr_rhs(uu + s * k3u, vv + s * k3v, gamma)
        uu += (s / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        vv += (s / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    # closed form where one component vanishes
    spm_u = v_zero
    spm_v = u_zero & ~v_zero
    uu[spm_u] = u[spm_u] * np.exp(1j * gamma * np.abs(u[spm_u]) ** 2 * h)
    vv[spm_v] = v[spm_v] * np.exp(1j * gamma * np.abs(v[spm_v]) ** 2 * h)
    u[...] = uu
    v[...] = vv


def spm_phase(u, gamma, h):
    """Exact scalar self-phase rotation, in place."""
    u *= np.exp(1j * gamma * (u.real * u.real + u.imag * u.imag) * h)


def coupled_kerr_exact(u, v, gamma, h):
    """Closed-form Kerr step in place.

    In the circular basis p, m = (u +- i v)/sqrt(2) the isotropic Kerr terms
    only rotate phases: p' = p exp(i 2/3 gamma (|p|^2 + 2|m|^2) h), likewise m.
    """
    r = np.sqrt(0.5)
    p = r * (u + 1j * v)
    m = r * (u - 1j * v)
    ap = np.abs(p) ** 2
    am = np.abs(m) ** 2
    k = 2.0 * gamma * h / 3.0
    p *= np.exp(1j * k * (ap + 2.0 * am))
    m *= np.exp(1j * k * (am + 2.0 * ap))
    u[...] = r * (p + m)
    v[...] = -1j * r * (p - m)
