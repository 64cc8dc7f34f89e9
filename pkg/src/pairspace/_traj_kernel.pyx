# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled batch propagator for semi-classical pair trajectories.

Per-particle adaptive Dormand-Prince 5(4) integration of (z, p_x, p_z)
through the analytic pulse.  Each particle is fully independent, so the
result does not depend on how a batch is partitioned.
"""

from libc.math cimport sqrt, exp, sin, cos, fabs, fmin, fmax

import numpy as np


cdef struct FieldP:
    double eps, tau, lam, omega, phi

cdef struct Toggles:
    int en_E, en_B, en_S, en_S_dzB, en_S_dzE


cdef inline void field_at(double t, double z, FieldP* fp,
                          double* E, double* B, double* dzE, double* dzB) noexcept nogil:
    cdef double env = exp(-(t / fp.tau) * (t / fp.tau))
    cdef double ph = fp.omega * t + fp.phi
    cdef double amp = fp.eps / fp.omega
    cdef double hB = amp * env * sin(ph)
    cdef double hE = amp * env * (2.0 * t * sin(ph) / (fp.tau * fp.tau)
                                  - fp.omega * cos(ph))
    cdef double x = z / fp.lam
    cdef double g = exp(-x * x)
    cdef double g1 = -2.0 * z / (fp.lam * fp.lam) * g
    cdef double g2 = (-2.0 / (fp.lam * fp.lam)
                      + 4.0 * z * z / (fp.lam * fp.lam * fp.lam * fp.lam)) * g
    E[0] = hE * g
    dzE[0] = hE * g1
    B[0] = hB * g1
    dzB[0] = hB * g2


cdef inline void deriv(double t, double* y, double q, double s,
                       FieldP* fp, Toggles* tg, double* dy) noexcept nogil:
    cdef double E = 0, B = 0, dzE = 0, dzB = 0
    cdef double px = y[1], pz = y[2]
    cdef double gam = sqrt(1.0 + px * px + pz * pz)
    field_at(t, y[0], fp, &E, &B, &dzE, &dzB)
    dy[0] = pz / gam
    dy[1] = 0.0
    if tg.en_B:
        dy[1] -= (pz / gam) * B
    if tg.en_E:
        dy[1] += E
    dy[1] *= q
    dy[2] = 0.0
    if tg.en_B:
        dy[2] += q * (px / gam) * B
    if tg.en_S:
        if tg.en_S_dzB:
            dy[2] += (s / gam) * dzB
        if tg.en_S_dzE:
            dy[2] -= (s / gam) * (pz / (gam + 1.0)) * dzE


# Dormand-Prince 5(4) tableau
cdef double[7] DP_C = [0.0, 1.0/5.0, 3.0/10.0, 4.0/5.0, 8.0/9.0, 1.0, 1.0]
cdef double[7][6] DP_A = [
    [0, 0, 0, 0, 0, 0],
    [1.0/5.0, 0, 0, 0, 0, 0],
    [3.0/40.0, 9.0/40.0, 0, 0, 0, 0],
    [44.0/45.0, -56.0/15.0, 32.0/9.0, 0, 0, 0],
    [19372.0/6561.0, -25360.0/2187.0, 64448.0/6561.0, -212.0/729.0, 0, 0],
    [9017.0/3168.0, -355.0/33.0, 46732.0/5247.0, 49.0/176.0, -5103.0/18656.0, 0],
    [35.0/384.0, 0.0, 500.0/1113.0, 125.0/192.0, -2187.0/6784.0, 11.0/84.0],
]
cdef double[7] DP_E = [71.0/57600.0, 0.0, -71.0/16695.0, 71.0/1920.0,
                       -17253.0/339200.0, 22.0/525.0, -1.0/40.0]


cdef int propagate_one(double t0, double t_end, double* y, double q, double s,
                       FieldP* fp, Toggles* tg, double rtol, double atol,
                       double dt_min) noexcept nogil:
    cdef double t = t0
    cdef double dt = fmin(1e-2, t_end - t0)
    cdef double h, err, sc, d, factor
    cdef double[7][3] K
    cdef double[3] ynew
    cdef double[3] dy
    cdef int i, j, m, last
    if t_end <= t0:
        return 0
    deriv(t, y, q, s, fp, tg, &K[0][0])
    while t < t_end:
        if dt < dt_min:
            return 1
        h = dt
        last = 0
        if t + h >= t_end:
            h = t_end - t
            last = 1
        for i in range(1, 7):
            for m in range(3):
                d = 0.0
                for j in range(i):
                    d += DP_A[i][j] * K[j][m]
                ynew[m] = y[m] + h * d
            deriv(t + DP_C[i] * h, &ynew[0], q, s, fp, tg, &K[i][0])
        # ynew from the last A-row is the 5th-order solution (FSAL)
        err = 0.0
        for m in range(3):
            d = 0.0
            for j in range(7):
                d += DP_E[j] * K[j][m]
            d *= h
            sc = atol + rtol * fmax(fabs(y[m]), fabs(ynew[m]))
            err += (d / sc) * (d / sc)
        err = sqrt(err / 3.0)
        if err <= 1.0:
            t = t_end if last else t + h
            for m in range(3):
                y[m] = ynew[m]
                K[0][m] = K[6][m]
            if err == 0.0:
                factor = 10.0
            else:
                factor = fmin(10.0, fmax(0.2, 0.9 * err ** (-0.2)))
            dt = fabs(h) * factor
        else:
            dt = fabs(h) * fmax(0.2, 0.9 * err ** (-0.2))
    return 0


def propagate_batch(double[:, ::1] y, double[::1] t0, double t_end,
                    double[::1] qsign, double[::1] spin,
                    double eps, double tau, double lam, double omega, double phi,
                    int en_E, int en_B, int en_S, int en_S_dzB, int en_S_dzE,
                    double rtol, double atol, double dt_min):
    """Propagate n particles in place; returns an int status array
    (0 = ok, 1 = step underflow)."""
    cdef FieldP fp
    cdef Toggles tg
    fp.eps = eps; fp.tau = tau; fp.lam = lam; fp.omega = omega; fp.phi = phi
    tg.en_E = en_E; tg.en_B = en_B; tg.en_S = en_S
    tg.en_S_dzB = en_S_dzB; tg.en_S_dzE = en_S_dzE
    cdef Py_ssize_t n = y.shape[0]
    status = np.zeros(n, dtype=np.int64)
    cdef long long[::1] st = status
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            st[i] = propagate_one(t0[i], t_end, &y[i, 0], qsign[i], spin[i],
                                  &fp, &tg, rtol, atol, dt_min)
    return status
