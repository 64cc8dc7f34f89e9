"""Stretched periodic phase-space grid and spectral operations.

The solver works on a 3-D box (z~, q_x, p_z) with periodic boundaries.
The spatial coordinate and the transverse momentum are stretched through

    x_phys = (2L/pi) * arctan( (1/alpha) * tan(pi * u / (2L)) )

so resolution can be redistributed along the box; alpha = 1 is the
identity.  The longitudinal momentum axis p_z is never stretched: the
nonlocal field kernels act multiplicatively in its conjugate space and
rely on a uniform grid there.

Derivatives are Fourier collocation derivatives with respect to the
stretched coordinate; multiplying by ``metric`` converts them to
physical derivatives (d/dx_phys = metric(u) * d/du).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft as sfft

__all__ = [
    "GridSpec",
    "stretch_map",
    "inverse_stretch_map",
    "metric_factor",
    "spectral_derivative",
    "dealias",
    "dealias_mask",
    "apply_nonlocal_kernel",
    "set_fft_workers",
    "get_fft_workers",
]

_FFT_WORKERS = 1


def set_fft_workers(n: int):
    """Number of threads used by all FFT calls in this module."""
    global _FFT_WORKERS
    _FFT_WORKERS = max(1, int(n))


def get_fft_workers() -> int:
    return _FFT_WORKERS


def stretch_map(u, L, alpha):
    """Stretched coordinate -> physical coordinate on (-L, L).

    Odd and monotone; alpha = 1 is the identity.  The endpoints +-L map
    to themselves.
    """
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > L):
        raise ValueError("stretched coordinate outside (-L, L)")
    half = np.isclose(np.abs(u), L)
    safe = np.where(half, 0.0, u)
    out = (2.0 * L / np.pi) * np.arctan(np.tan(np.pi * safe / (2.0 * L)) / alpha)
    out = np.where(half, np.sign(u) * L, out)
    return float(out) if out.ndim == 0 else out


def inverse_stretch_map(x, L, alpha):
    """Physical coordinate -> stretched coordinate (exact inverse)."""
    x = np.asarray(x, dtype=float)
    half = np.isclose(np.abs(x), L)
    safe = np.where(half, 0.0, x)
    out = (2.0 * L / np.pi) * np.arctan(alpha * np.tan(np.pi * safe / (2.0 * L)))
    out = np.where(half, np.sign(x) * L, out)
    return float(out) if out.ndim == 0 else out


def metric_factor(u, L, alpha):
    """Factor converting stretched derivatives to physical ones.

    d/dx_phys = metric_factor(u) * d/du; equals 1/(dx_phys/du) and is
    strictly positive, alpha at u = 0 and 1/alpha at u = +-L.
    """
    u = np.asarray(u, dtype=float)
    c = np.cos(np.pi * u / (2.0 * L))
    s = np.sin(np.pi * u / (2.0 * L))
    out = alpha * c * c + s * s / alpha
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GridSpec:
    """Sizes, half-box lengths and stretching of the (z~, q_x, p_z) grid."""

    n_z: int = 64
    n_qx: int = 64
    n_pz: int = 64
    L_z: float = 60.0
    L_q: float = 4.0
    L_pz: float = 1.5
    alpha_z: float = 1.0
    alpha_q: float = 1.0
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        for name in ("n_z", "n_qx", "n_pz"):
            n = getattr(self, name)
            if n < 8 or n % 2:
                raise ValueError(f"{name} must be even and >= 8, got {n}")
        for name in ("L_z", "L_q", "L_pz", "alpha_z", "alpha_q"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError("dealias_fraction must be in (0, 1]")

    @property
    def shape(self):
        return (self.n_z, self.n_qx, self.n_pz)

    # -- coordinate tables ---------------------------------------------------

    @cached_property
    def z_tilde(self):
        return -self.L_z + 2.0 * self.L_z * np.arange(self.n_z) / self.n_z

    @cached_property
    def q_x(self):
        return -self.L_q + 2.0 * self.L_q * np.arange(self.n_qx) / self.n_qx

    @cached_property
    def p_z(self):
        return -self.L_pz + 2.0 * self.L_pz * np.arange(self.n_pz) / self.n_pz

    @cached_property
    def z_phys(self):
        return stretch_map(self.z_tilde, self.L_z, self.alpha_z)

    @cached_property
    def p_x(self):
        return stretch_map(self.q_x, self.L_q, self.alpha_q)

    @cached_property
    def metric_z(self):
        return metric_factor(self.z_tilde, self.L_z, self.alpha_z)

    @cached_property
    def metric_q(self):
        return metric_factor(self.q_x, self.L_q, self.alpha_q)

    # -- wavenumbers ---------------------------------------------------------

    @cached_property
    def k_z(self):
        return 2.0 * np.pi * sfft.fftfreq(self.n_z, d=2.0 * self.L_z / self.n_z)

    @cached_property
    def k_qx_r(self):
        return 2.0 * np.pi * sfft.rfftfreq(self.n_qx, d=2.0 * self.L_q / self.n_qx)

    @cached_property
    def k_pz_r(self):
        return 2.0 * np.pi * sfft.rfftfreq(self.n_pz, d=2.0 * self.L_pz / self.n_pz)

    # -- quadrature weights (physical measure on each axis) ------------------

    @cached_property
    def w_z(self):
        return (2.0 * self.L_z / self.n_z) / self.metric_z

    @cached_property
    def w_qx(self):
        return (2.0 * self.L_q / self.n_qx) / self.metric_q

    @cached_property
    def w_pz(self):
        return np.full(self.n_pz, 2.0 * self.L_pz / self.n_pz)


def dealias_mask(n, fraction, rfft_axis=False):
    """Boolean keep-mask on FFT (or rfft) frequency ordering for one axis."""
    if rfft_axis:
        k = np.arange(n // 2 + 1)
    else:
        k = np.abs(np.fft.fftfreq(n) * n)
    return k <= fraction * (n // 2)


def dealias(f_hat, fraction, axes=None):
    """Zero modes with |k| above fraction * k_Nyquist, per axis (full FFT layout)."""
    out = np.array(f_hat, copy=True)
    if axes is None:
        axes = range(out.ndim)
    for ax in axes:
        m = dealias_mask(out.shape[ax], fraction)
        sl = [None] * out.ndim
        sl[ax] = slice(None)
        out *= m[tuple(sl)]
    return out


def spectral_derivative(f, axis, L):
    """Fourier derivative along ``axis`` with respect to the stretched
    coordinate of half-length L (multiply by the metric for physical)."""
    f = np.asarray(f)
    n = f.shape[axis]
    k = 2.0 * np.pi * sfft.rfftfreq(n, d=2.0 * L / n)
    fh = sfft.rfft(f, axis=axis, workers=_FFT_WORKERS)
    shape = [1] * f.ndim
    shape[axis] = k.size
    fh *= 1j * k.reshape(shape)
    # zero the (unpaired) Nyquist mode of the derivative
    if n % 2 == 0:
        idx = [slice(None)] * f.ndim
        idx[axis] = -1
        fh[tuple(idx)] = 0.0
    return sfft.irfft(fh, n=n, axis=axis, workers=_FFT_WORKERS)


def apply_nonlocal_kernel(f, kernel, grid: GridSpec, with_px_derivative=False):
    """Apply a multiplicative kernel K(z, k_{p_z}) in mixed space.

    Transforms ``f`` along the p_z axis, multiplies pointwise by the
    kernel table (shape (n_z, n_pz//2 + 1), possibly complex as long as
    it maps real fields to real fields), and transforms back.  With
    ``with_px_derivative`` the physical d/dp_x is applied on top.
    """
    f = np.asarray(f, dtype=float)
    if kernel.shape != (grid.n_z, grid.n_pz // 2 + 1):
        raise ValueError(
            f"kernel table shape {kernel.shape} does not match grid "
            f"({grid.n_z}, {grid.n_pz // 2 + 1})"
        )
    fh = sfft.rfft(f, axis=2, workers=_FFT_WORKERS)
    fh *= kernel[:, None, :]
    out = sfft.irfft(fh, n=grid.n_pz, axis=2, workers=_FFT_WORKERS)
    if with_px_derivative:
        out = spectral_derivative(out, axis=1, L=grid.L_q)
        out *= grid.metric_q[None, :, None]
    return out
