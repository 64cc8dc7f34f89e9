"""Embedded Dormand-Prince 8(5,3) Runge-Kutta stepper.

Twelve-stage explicit 8th-order method with the combined 5th/3rd order
error estimate and PI step-size control.  Operates on flat float arrays;
callers flatten whatever structure they carry.

A fixed-step driver is included for order-convergence studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._dop853_tableau import A, B, C, E3, E5, N_STAGES

__all__ = ["StepControl", "Dop853", "StepUnderflowError", "integrate_fixed"]

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


class StepUnderflowError(RuntimeError):
    """Raised when the controller would need a step below dt_min."""


@dataclass
class StepControl:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-8
    dt_init: float = 1e-3
    dt_min: float = 1e-12
    dt_max: float = 10.0
    pi_beta: float = 0.04  # PI controller damping; 0 recovers pure I control

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if not self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need dt_min <= dt_init <= dt_max")


class Dop853:
    """Adaptive integrator for y' = fun(t, y), y a flat float array."""

    def __init__(self, fun, control: StepControl):
        self.fun = fun
        self.control = control
        self.n_accepted = 0
        self.n_rejected = 0
        self._err_prev = 1.0

    def _stages(self, t, y, h, f0):
        K = np.empty((N_STAGES + 1,) + y.shape)
        K[0] = f0
        for s in range(1, N_STAGES):
            dy = h * (A[s, :s].T @ K[:s].reshape(s, -1)).reshape(y.shape)
            K[s] = self.fun(t + C[s] * h, y + dy)
        y_new = y + h * (B @ K[:N_STAGES].reshape(N_STAGES, -1)).reshape(y.shape)
        K[N_STAGES] = self.fun(t + h, y_new)
        return y_new, K

    def _error_norm(self, K, h, scale):
        err5 = (E5 @ K.reshape(K.shape[0], -1)) / scale.ravel()
        err3 = (E3 @ K.reshape(K.shape[0], -1)) / scale.ravel()
        e5 = float(np.dot(err5, err5))
        e3 = float(np.dot(err3, err3))
        if e5 == 0.0 and e3 == 0.0:
            return 0.0
        return abs(h) * e5 / math.sqrt((e5 + 0.01 * e3) * err5.size)

    def step(self, t, y, dt, f0=None, t_bound=None):
        """One accepted step.

        Retries with shrinking dt until the mixed error norm is <= 1;
        returns (t_new, y_new, f_new, dt_next, error_norm).  Raises
        StepUnderflowError once dt would fall below dt_min.
        """
        c = self.control
        if f0 is None:
            f0 = self.fun(t, y)
        dt = min(dt, c.dt_max)
        while True:
            if dt < c.dt_min:
                raise StepUnderflowError(
                    f"step size underflow at t = {t:.6g} (dt = {dt:.3g} < "
                    f"dt_min = {c.dt_min:.3g})"
                )
            h = dt
            clipped = t_bound is not None and t + h > t_bound
            if clipped:
                h = t_bound - t
            y_new, K = self._stages(t, y, h, f0)
            scale = c.abs_tol + c.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err = self._error_norm(K, h, scale)
            if err <= 1.0:
                self.n_accepted += 1
                if err == 0.0:
                    factor = _MAX_FACTOR
                else:
                    # PI control: damp with the previous accepted error
                    expo = 1.0 / 8.0 - 0.75 * c.pi_beta
                    factor = _SAFETY * err ** (-expo) * self._err_prev ** c.pi_beta
                    factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
                self._err_prev = max(err, 1e-10)
                dt_next = min(c.dt_max, max(c.dt_min, abs(h) * factor))
                return t + h, y_new, K[N_STAGES], dt_next, err
            self.n_rejected += 1
            dt = abs(h) * max(_MIN_FACTOR, _SAFETY * err ** (-1.0 / 8.0))

    def solve(self, t0, y0, t1, snapshot_times=(), snapshot_cb=None):
        """Integrate from t0 to t1, landing exactly on each snapshot time."""
        c = self.control
        t, y = t0, np.asarray(y0, dtype=float)
        f = self.fun(t, y)
        dt = c.dt_init
        marks = sorted(tm for tm in snapshot_times if t0 < tm < t1)
        marks.append(t1)
        for mark in marks:
            while t < mark - 1e-14 * max(1.0, abs(mark)):
                t, y, f, dt, _ = self.step(t, y, dt, f0=f, t_bound=mark)
            if snapshot_cb is not None and mark != t1:
                snapshot_cb(t, y)
        return t, y


def integrate_fixed(fun, t0, y0, t1, n_steps):
    """Fixed-step driver using only the 8th-order formula (order studies)."""
    h = (t1 - t0) / n_steps
    t = t0
    y = np.asarray(y0, dtype=float).copy()
    for _ in range(n_steps):
        K = np.empty((N_STAGES,) + y.shape)
        K[0] = fun(t, y)
        for s in range(1, N_STAGES):
            dy = h * (A[s, :s].T @ K[:s].reshape(s, -1)).reshape(y.shape)
            K[s] = fun(t + C[s] * h, y + dy)
        y += h * (B @ K.reshape(N_STAGES, -1)).reshape(y.shape)
        t += h
    return y
