"""Momentum-space pair-production oracle for homogeneous fields.

For a spatially uniform, linearly polarized electric field the one-particle
distribution f(p, t) obeys a closed three-variable ODE system per momentum
mode:

    df/dt = (W/2) u
    du/dt = W (1 - 2 f) - 2 Omega v
    dv/dt = 2 Omega u

with canonical momentum P(t) = p_x - A(t), transverse energy
eps_perp = sqrt(1 + p_z^2), total energy Omega = sqrt(eps_perp^2 + P^2)
and W = E(t) eps_perp / Omega^2.  The quantity (1 - 2 f)^2 + u^2 + v^2 = 1
is conserved, which doubles as an accuracy diagnostic.

This is the local (z = 0) limit of the full phase-space evolution and is
used to validate the spectral solver on quasi-homogeneous setups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fields as fld
from .dop853 import Dop853, StepControl
from .fields import FieldParams

__all__ = ["QktPoint", "solve_qkt", "solve_qkt_grid"]


@dataclass(frozen=True)
class QktPoint:
    """Result of the oracle at one momentum point."""

    p_x: float
    p_z: float
    f: float
    u: float
    v: float
    bloch_residual: float  # |(1-2f)^2 + u^2 + v^2 - 1| at the final time


def _rhs_factory(px, pz, params: FieldParams):
    px = np.atleast_1d(np.asarray(px, dtype=float))
    pz = np.atleast_1d(np.asarray(pz, dtype=float))
    if px.shape != pz.shape:
        raise ValueError("p_x and p_z must have the same shape")
    n = px.size
    eps2 = 1.0 + pz * pz

    def rhs(t, y):
        f, u, v = y[:n], y[n:2 * n], y[2 * n:]
        A = float(fld.vector_potential(t, 0.0, params))
        E = float(fld.electric_field(t, 0.0, params))
        P = px - A
        om2 = eps2 + P * P
        om = np.sqrt(om2)
        W = E * np.sqrt(eps2) / om2
        return np.concatenate([
            0.5 * W * u,
            W * (1.0 - 2.0 * f) - 2.0 * om * v,
            2.0 * om * u,
        ])

    return rhs, n


def solve_qkt_grid(px, pz, params: FieldParams, t_start, t_end,
                   rel_tol=1e-10, abs_tol=1e-12):
    """Solve the oracle ODEs for arrays of momentum points.

    Returns (f, u, v, bloch_residual) arrays with the input shape.
    """
    px = np.asarray(px, dtype=float)
    shape = px.shape
    rhs, n = _rhs_factory(px.ravel(), np.asarray(pz, dtype=float).ravel(), params)
    y0 = np.zeros(3 * n)
    solver = Dop853(rhs, StepControl(rel_tol=rel_tol, abs_tol=abs_tol,
                                     dt_init=1e-3, dt_max=1.0))
    _, y = solver.solve(t_start, y0, t_end)
    f, u, v = y[:n], y[n:2 * n], y[2 * n:]
    res = np.abs((1.0 - 2.0 * f) ** 2 + u * u + v * v - 1.0)
    return f.reshape(shape), u.reshape(shape), v.reshape(shape), res.reshape(shape)


def solve_qkt(p_x, p_z, params: FieldParams, t_start, t_end,
              rel_tol=1e-10, abs_tol=1e-12) -> QktPoint:
    """Single-point convenience wrapper around :func:`solve_qkt_grid`."""
    f, u, v, res = solve_qkt_grid(np.array([p_x]), np.array([p_z]), params,
                                  t_start, t_end, rel_tol, abs_tol)
    return QktPoint(p_x=float(p_x), p_z=float(p_z), f=float(f[0]),
                    u=float(u[0]), v=float(v[0]), bloch_residual=float(res[0]))
