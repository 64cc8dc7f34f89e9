"""Analytic background field model.

A single linearly polarized few-cycle pulse localized in time and in one
spatial direction,

    eA_x(t, z) = (eps/omega) * exp(-z^2/lambda^2) * exp(-t^2/tau^2)
                 * sin(omega*t + phi),

with E = -dA/dt along x and B = dA/dz along y.  Everything is expressed
in electron-mass units (hbar = c = m = 1) and fields are stored with the
charge absorbed, i.e. eA, eE, eB, so the critical field strength is 1.

The time dependence factors out of both E and B, which is what makes the
nonlocal spectral kernels of the phase-space solver precomputable: only
the spatial moment tables depend on the grid, the time factor is a
scalar per evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "FieldParams",
    "FieldInvariants",
    "vector_potential",
    "electric_field",
    "magnetic_field",
    "field_gradients",
    "envelope_time_factor",
    "electric_time_factor",
    "gaussian_profile_derivative",
    "secular_field",
    "kernel_moment",
    "peak_potential",
]


@dataclass(frozen=True)
class FieldParams:
    """Five-knob pulse model.

    epsilon : peak field strength in units of the critical field
    tau     : temporal scale [1/m]
    lam     : spatial scale [1/m]
    omega   : carrier control parameter [m]
    phi     : carrier-envelope phase [rad], in [0, 2*pi)
    """

    epsilon: float
    tau: float
    lam: float
    omega: float
    phi: float = 0.0

    def __post_init__(self):
        if not (self.epsilon > 0 or self.epsilon == 0):
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        for name in ("tau", "lam", "omega"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not (0.0 <= self.phi < 2.0 * math.pi):
            raise ValueError(f"phi must lie in [0, 2*pi), got {self.phi}")


@dataclass(frozen=True)
class FieldInvariants:
    """Lorentz invariants and the derived secular fields.

    For the perpendicular E, B of this field model G vanishes identically,
    hence b = 0 and a = sqrt(max(E^2 - B^2, 0)).  a = 0 signals that pair
    production is classically forbidden (magnetically dominated region).
    """

    F: float
    G: float
    a: float
    b: float


def envelope_time_factor(t, p: FieldParams):
    """Time factor shared by A and B: (eps/omega) exp(-t^2/tau^2) sin(omega t + phi)."""
    t = np.asarray(t, dtype=float)
    return (p.epsilon / p.omega) * np.exp(-(t / p.tau) ** 2) * np.sin(p.omega * t + p.phi)


def electric_time_factor(t, p: FieldParams):
    """Time factor of E = -dA/dt (the spatial Gaussian divides out)."""
    t = np.asarray(t, dtype=float)
    env = np.exp(-(t / p.tau) ** 2)
    ph = p.omega * t + p.phi
    return (p.epsilon / p.omega) * env * (
        2.0 * t * np.sin(ph) - p.omega * p.tau ** 2 * np.cos(ph)
    ) / p.tau ** 2


def vector_potential(t, z, p: FieldParams):
    """eA_x(t, z) in units of m."""
    z = np.asarray(z, dtype=float)
    return np.exp(-(z / p.lam) ** 2) * envelope_time_factor(t, p)


def electric_field(t, z, p: FieldParams):
    """eE_x(t, z) = -d(eA_x)/dt, in units of m^2."""
    z = np.asarray(z, dtype=float)
    return np.exp(-(z / p.lam) ** 2) * electric_time_factor(t, p)


def magnetic_field(t, z, p: FieldParams):
    """eB_y(t, z) = d(eA_x)/dz, in units of m^2."""
    z = np.asarray(z, dtype=float)
    return (-2.0 * z / p.lam ** 2) * np.exp(-(z / p.lam) ** 2) * envelope_time_factor(t, p)


def field_gradients(t, z, p: FieldParams):
    """Analytic (d_z eE_x, d_z eB_y)."""
    z = np.asarray(z, dtype=float)
    g = np.exp(-(z / p.lam) ** 2)
    dg = -2.0 * z / p.lam ** 2 * g
    d2g = (-2.0 / p.lam ** 2 + 4.0 * z ** 2 / p.lam ** 4) * g
    return dg * electric_time_factor(t, p), d2g * envelope_time_factor(t, p)


def gaussian_profile_derivative(z, lam, order):
    """order-th derivative of exp(-z^2/lam^2), via Hermite recurrence."""
    z = np.asarray(z, dtype=float)
    x = z / lam
    g = np.exp(-x * x)
    if order == 0:
        return g
    h_prev = np.ones_like(x)
    h = 2.0 * x
    for m in range(1, order):
        h_prev, h = h, 2.0 * x * h - 2.0 * m * h_prev
    return (-1.0 / lam) ** order * h * g


def peak_potential(p: FieldParams, n_scan: int = 4001):
    """Global maximum of |eA| (attained at z = 0), from a dense time scan."""
    t = np.linspace(-5.0 * p.tau, 5.0 * p.tau, n_scan)
    return float(np.max(np.abs(envelope_time_factor(t, p))))


def secular_field(E, B):
    """Invariants and secular fields for perpendicular E, B.

    F = (B^2 - E^2)/2 and G = 0 by construction of the field model, so
    b = 0 and a = sqrt(max(E^2 - B^2, 0)); a is clamped to zero in
    magnetically dominated regions where pair production is forbidden.
    """
    E = np.asarray(E, dtype=float)
    B = np.asarray(B, dtype=float)
    if not (np.all(np.isfinite(E)) and np.all(np.isfinite(B))):
        raise ValueError("E, B must be finite")
    F = 0.5 * (B * B - E * E)
    a = np.sqrt(np.maximum(E * E - B * B, 0.0))
    if np.ndim(a) == 0:
        return FieldInvariants(F=float(F), G=0.0, a=float(a), b=0.0)
    return FieldInvariants(F=F, G=np.zeros_like(F), a=a, b=np.zeros_like(F))


def secular_a(t, z, p: FieldParams):
    """Shortcut: a(t, z) for the background field."""
    E = electric_field(t, z, p)
    B = magnetic_field(t, z, p)
    return np.sqrt(np.maximum(E * E - B * B, 0.0))


# -- closed-form xi-integral moments -----------------------------------------
#
#   M_n(z, k) = int_{-1/2}^{1/2} dxi  xi^n  exp(-(z - xi k)^2 / lam^2)
#
# These turn the nonlocal pseudo-differential operators into multiplicative
# kernels in mixed (z, k_{p_z}) space.  The erf-based closed forms are
# catastrophically cancellative as k -> 0, so below a threshold the moments
# are evaluated by their Taylor series in k instead.

_TAYLOR_SWITCH = 0.3    # on |k| * (|z|/lam^2 + 1/lam); erf form is safe above
_TAYLOR_ORDER = 12

# int_{-1/2}^{1/2} xi^j dxi  (zero for odd j)
_XI_MOMENTS = np.array(
    [0.0 if j % 2 else 2.0 ** (-j) / (j + 1) for j in range(_TAYLOR_ORDER + 3)]
)


def _kernel_moment_taylor(n, z, k, lam):
    # M_n = e^{-(z/lam)^2} * sum_m (k/lam)^m H_m(z/lam) c_{n+m} / m!
    x = z / lam
    g = np.exp(-x * x)
    kl = k / lam
    total = np.zeros_like(x)
    h_prev = np.zeros_like(x)   # H_{m-1}
    h = np.ones_like(x)         # H_m, starting at H_0 = 1
    kp = np.ones_like(x)
    fact = 1.0
    for m in range(_TAYLOR_ORDER + 1):
        if m > 0:
            kp = kp * kl
            fact *= m
        if (n + m) % 2 == 0:
            total = total + (_XI_MOMENTS[n + m] / fact) * kp * h
        h_prev, h = h, 2.0 * x * h - 2.0 * m * h_prev
    return g * total


def _erf_difference(a, b):
    # erf(b) - erf(a) for b >= a >= ... computed without cancellation when
    # both arguments sit in the same tail.
    same_positive = a > 0.0  # then 0 < a < b: use the complementary function
    out = np.where(
        same_positive,
        special.erfc(np.where(same_positive, a, 0.0))
        - special.erfc(np.where(same_positive, b, 1.0)),
        special.erf(b) - special.erf(a),
    )
    return out


def _kernel_moment_closed(n, z, k, lam):
    # assumes z >= 0, k > 0
    a = (z - 0.5 * k) / lam
    b = (z + 0.5 * k) / lam
    erf_diff = _erf_difference(a, b)
    m0 = (lam * math.sqrt(math.pi) / (2.0 * k)) * erf_diff
    if n == 0:
        return m0
    # d = b^2 - a^2 >= 0;  e^{-a^2} - e^{-b^2} = -e^{-a^2} expm1(-d)
    d = 2.0 * z * k / lam ** 2
    ea = np.exp(-a * a)
    dm = -ea * np.expm1(-d)
    m1 = (z / k) * m0 - (lam ** 2 / (2.0 * k ** 2)) * dm
    if n == 1:
        return m1
    # b e^{-b^2} - a e^{-a^2} = e^{-a^2} (b expm1(-d) + k/lam)
    edge = ea * (b * np.expm1(-d) + k / lam)
    m2 = (
        (z ** 2 + 0.5 * lam ** 2) / k ** 2 * m0
        - (z * lam ** 2 / k ** 3) * dm
        - (lam ** 3 / (2.0 * k ** 3)) * edge
    )
    return m2


def kernel_moment(n, z, k, lam):
    """M_n(z, k) for n in {0, 1, 2}; well conditioned across k = 0."""
    if n not in (0, 1, 2):
        raise ValueError(f"moment order must be 0, 1 or 2, got {n}")
    if not lam > 0:
        raise ValueError("lam must be > 0")
    z, k = np.broadcast_arrays(
        np.asarray(z, dtype=float), np.asarray(k, dtype=float)
    )
    shape = z.shape
    scalar = z.ndim == 0
    z = np.atleast_1d(z).ravel().astype(float)
    k = np.atleast_1d(k).ravel().astype(float)

    # parity reduction to z >= 0, k >= 0:
    #   M_n(-z, k) = (-1)^n M_n(z, k),  M_n(z, -k) = (-1)^n M_n(z, k)
    sign = np.ones_like(z)
    if n % 2 == 1:
        sign = np.where(z < 0, -sign, sign)
        sign = np.where(k < 0, -sign, sign)
    za = np.abs(z)
    ka = np.abs(k)

    out = np.empty_like(za)
    small = ka * (za / lam ** 2 + 1.0 / lam) < _TAYLOR_SWITCH
    if np.any(small):
        out[small] = _kernel_moment_taylor(n, za[small], ka[small], lam)
    big = ~small
    if np.any(big):
        out[big] = _kernel_moment_closed(n, za[big], ka[big], lam)
    out *= sign
    return float(out[0]) if scalar else out.reshape(shape)
