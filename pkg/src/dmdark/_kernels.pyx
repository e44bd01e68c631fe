# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Kerr kernels. Same contract as ``dmdark._kernels_py``."""

from libc.math cimport cos, sin

cdef double TWO_THIRDS = 2.0 / 3.0
cdef double ONE_THIRD = 1.0 / 3.0


cdef inline void _rhs(double ur, double ui, double vr, double vi, double gamma,
                      double* dur, double* dui, double* dvr, double* dvi) noexcept nogil:
    # du = i*gamma*[(|u|^2 + 2/3|v|^2) u + 1/3 v^2 conj(u)], dv symmetric
    cdef double au = ur * ur + ui * ui
    cdef double av = vr * vr + vi * vi
    cdef double v2r = vr * vr - vi * vi
    cdef double v2i = 2.0 * vr * vi
    cdef double u2r = ur * ur - ui * ui
    cdef double u2i = 2.0 * ur * ui
    cdef double su = au + TWO_THIRDS * av
    cdef double sv = av + TWO_THIRDS * au
    # a = su*u + 1/3 * v^2 * conj(u)
    cdef double ar = su * ur + ONE_THIRD * (v2r * ur + v2i * ui)
    cdef double ai = su * ui + ONE_THIRD * (v2i * ur - v2r * ui)
    cdef double br = sv * vr + ONE_THIRD * (u2r * vr + u2i * vi)
    cdef double bi = sv * vi + ONE_THIRD * (u2i * vr - u2r * vi)
    dur[0] = -gamma * ai
    dui[0] = gamma * ar
    dvr[0] = -gamma * bi
    dvi[0] = gamma * br


cdef inline void _rotate(double complex* z, double phi) noexcept nogil:
    cdef double c = cos(phi)
    cdef double s = sin(phi)
    cdef double zr = z[0].real
    cdef double zi = z[0].imag
    z[0] = (zr * c - zi * s) + 1j * (zr * s + zi * c)


def coupled_kerr_rk4(double complex[::1] u, double complex[::1] v,
                     double gamma, double h, int nsub):
    cdef Py_ssize_t i, n = u.shape[0]
    cdef int j
    cdef double s, s2, s6
    cdef double ur, ui, vr, vi
    cdef double k1ur, k1ui, k1vr, k1vi, k2ur, k2ui, k2vr, k2vi
    cdef double k3ur, k3ui, k3vr, k3vi, k4ur, k4ui, k4vr, k4vi
    if v.shape[0] != n:
        raise ValueError("u and v must have the same length")
    if gamma == 0.0 or h == 0.0:
        return
    s = h / nsub
    s2 = 0.5 * s
    s6 = s / 6.0
    with nogil:
        for i in range(n):
            ur = u[i].real
            ui = u[i].imag
            vr = v[i].real
            vi = v[i].imag
            if vr == 0.0 and vi == 0.0:
                _rotate(&u[i], gamma * (ur * ur + ui * ui) * h)
                continue
            if ur == 0.0 and ui == 0.0:
                _rotate(&v[i], gamma * (vr * vr + vi * vi) * h)
                continue
            for j in range(nsub):
                _rhs(ur, ui, vr, vi, gamma, &k1ur, &k1ui, &k1vr, &k1vi)
                _rhs(ur + s2 * k1ur, ui + s2 * k1ui, vr + s2 * k1vr, vi + s2 * k1vi,
                     gamma, &k2ur, &k2ui, &k2vr, &k2vi)
                _rhs(ur + s2 * k2ur, ui + s2 * k2ui, vr + s2 * k2vr, vi + s2 * k2vi,
                     gamma, &k3ur, &k3ui, &k3vr, &k3vi)
                _rhs(ur + s * k3ur, ui + s * k3ui, vr + s * k3vr, vi + s * k3vi,
                     gamma, &k4ur, &k4ui, &k4vr, &k4vi)
                ur = ur + s6 * (k1ur + 2.0 * k2ur + 2.0 * k3ur + k4ur)
                ui = ui + s6 * (k1ui + 2.0 * k2ui + 2.0 * k3ui + k4ui)
                vr = vr + s6 * (k1vr + 2.0 * k2vr + 2.0 * k3vr + k4vr)
                vi = vi + s6 * (k1vi + 2.0 * k2vi + 2.0 * k3vi + k4vi)
            u[i] = ur + 1j * ui
            v[i] = vr + 1j * vi


def spm_phase(double complex[::1] u, double gamma, double h):
    cdef Py_ssize_t i, n = u.shape[0]
    with nogil:
        for i in range(n):
            _rotate(&u[i], gamma * (u[i].real * u[i].real + u[i].imag * u[i].imag) * h)


def coupled_kerr_exact(double complex[::1] u, double complex[::1] v, double gamma, double h):
    # circular basis p, m = (u +- i v)/sqrt2 keeps |p|, |m| fixed under the Kerr terms
    cdef Py_ssize_t i, n = u.shape[0]
    cdef double r = 0.7071067811865476
    cdef double k = 2.0 * gamma * h / 3.0
    cdef double pr, pi_, mr, mi, P, M, phip, phim, c, s, tr, ti
    if v.shape[0] != n:
        raise ValueError("u and v must have the same length")
    with nogil:
        for i in range(n):
            pr = r * (u[i].real - v[i].imag)
            pi_ = r * (u[i].imag + v[i].real)
            mr = r * (u[i].real + v[i].imag)
            mi = r * (u[i].imag - v[i].real)
            P = pr * pr + pi_ * pi_
            M = mr * mr + mi * mi
            phip = k * (P + 2.0 * M)
            phim = k * (M + 2.0 * P)
            c = cos(phip)
            s = sin(phip)
            tr = pr * c - pi_ * s
            ti = pr * s + pi_ * c
            pr = tr
            pi_ = ti
            c = cos(phim)
            s = sin(phim)
            tr = mr * c - mi * s
            ti = mr * s + mi * c
            mr = tr
            mi = ti
            # u = (p + m)/sqrt2, v = -i (p - m)/sqrt2
            u[i] = r * (pr + mr) + 1j * r * (pi_ + mi)
            v[i] = r * (pi_ - mi) - 1j * r * (pr - mr)
