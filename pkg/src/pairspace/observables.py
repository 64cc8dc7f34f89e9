"""Reduction of the final Wigner state to physical densities and maps.

The vacuum-subtracted components yield the particle number density

    n(z, p_x, p_z) = (s^v + p_x v1^v + p_z v3^v) / sqrt(1 + p^2)

and the charge density c = v0^v, both defined at asymptotic times where
the background field has died off.  The species-resolved quasi
distributions are f_- = n/2 - c/2 (electrons) and f_+ = n/2 + c/2
(positrons); mixed-species maps are quasi-distributions since
antiparticles are conventionally defined with reversed momenta.

Fine-scale quantum interference makes n locally negative; the discrete
Gaussian smearing operator (coarse_grain) recovers a non-negative
semi-classical density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import fields as fld
from .dhw import WignerState
from .fields import FieldParams
from .grid import GridSpec

__all__ = [
    "DensityMap",
    "CoarseGrainSpec",
    "number_density",
    "charge_density",
    "species_split",
    "marginals",
    "coarse_grain",
    "total_number",
    "total_charge",
]


@dataclass(frozen=True)
class DensityMap:
    """A named density array with physical coordinate axes."""

    values: np.ndarray
    axes: tuple  # tuple of (name, coordinate-array) pairs, one per dimension
    note: str = ""

    def __post_init__(self):
        if len(self.axes) != self.values.ndim:
            raise ValueError("one axis entry required per array dimension")
        for i, (name, coord) in enumerate(self.axes):
            coord = np.asarray(coord)
            if coord.ndim != 1 or coord.size != self.values.shape[i]:
                raise ValueError(f"axis {name!r} does not match values shape")
            if np.any(np.diff(coord) <= 0):
                raise ValueError(f"axis {name!r} must be strictly increasing")

    @property
    def axis_names(self):
        return tuple(name for name, _ in self.axes)


@dataclass(frozen=True)
class CoarseGrainSpec:
    """Discrete Gaussian smearing stencil, in grid-index units.

    sigma is the Gaussian width and half_width M the stencil cut-off
    |Delta i| <= M, per smeared axis.
    """

    sigma: float = 20.0
    half_width: int = 6

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if self.half_width < 1:
            raise ValueError("half_width must be >= 1")


def _require_asymptotic(state: WignerState, field: FieldParams, grid: GridSpec):
    if field.epsilon == 0:
        return
    peak = fld.peak_potential(field)
    a_now = float(np.max(np.abs(
        fld.vector_potential(state.t, grid.z_phys, field))))
    if a_now > 1e-6 * peak:
        raise ValueError(
            f"state at t = {state.t:.6g} is not asymptotic: |A| = {a_now:.3g} "
            f"exceeds 1e-6 of the pulse peak {peak:.3g}"
        )


def number_density(state: WignerState, grid: GridSpec,
                   field: FieldParams) -> DensityMap:
    """Particle number density n(z, p_x, p_z) at asymptotic time."""
    _require_asymptotic(state, field, grid)
    px = grid.p_x[None, :, None]
    pz = grid.p_z[None, None, :]
    w = np.sqrt(1.0 + px * px + pz * pz)
    n = (state.s + px * state.v1 + pz * state.v3) / w
    return DensityMap(n, (("z", grid.z_phys), ("p_x", grid.p_x),
                          ("p_z", grid.p_z)))


def charge_density(state: WignerState, grid: GridSpec,
                   field: FieldParams) -> DensityMap:
    """Charge density c(z, p_x, p_z) at asymptotic time."""
    _require_asymptotic(state, field, grid)
    return DensityMap(state.v0.copy(), (("z", grid.z_phys),
                                        ("p_x", grid.p_x), ("p_z", grid.p_z)))


def species_split(n: DensityMap, c: DensityMap):
    """(f_minus, f_plus) with f_-/+ = n/2 -/+ c/2; sums back to n exactly."""
    if n.values.shape != c.values.shape:
        raise ValueError("number and charge densities must share a shape")
    note = "quasi-distribution: antiparticle momenta not reversed"
    f_minus = DensityMap(0.5 * n.values - 0.5 * c.values, n.axes, note)
    f_plus = DensityMap(0.5 * n.values + 0.5 * c.values, n.axes, note)
    return f_minus, f_plus


def _weights(grid: GridSpec):
    return {"z": grid.w_z, "p_x": grid.w_qx, "p_z": grid.w_pz}


def reduce_density(dmap: DensityMap, grid: GridSpec, keep):
    """Integrate a density map over all axes not listed in ``keep``.

    Integration uses the metric-corrected quadrature weights of each
    stretched axis (plain cell widths on uniform axes).
    """
    keep = tuple(keep)
    names = dmap.axis_names
    for k in keep:
        if k not in names:
            raise ValueError(f"unknown axis {k!r}")
    w = _weights(grid)
    vals = dmap.values
    # integrate from the last axis backwards so indices stay valid
    for i in range(len(names) - 1, -1, -1):
        if names[i] in keep:
            continue
        shape = [1] * vals.ndim
        shape[i] = vals.shape[i]
        vals = np.sum(vals * w[names[i]].reshape(shape), axis=i)
    axes = tuple(ax for ax in dmap.axes if ax[0] in keep)
    return DensityMap(vals, axes, dmap.note)


def marginals(n: DensityMap, grid: GridSpec):
    """Standard marginal set: n(p_x,p_z), n(p_x), n(p_z), n(z,p_z)."""
    return {
        "p_x,p_z": reduce_density(n, grid, ("p_x", "p_z")),
        "p_x": reduce_density(n, grid, ("p_x",)),
        "p_z": reduce_density(n, grid, ("p_z",)),
        "z,p_z": reduce_density(n, grid, ("z", "p_z")),
    }


def total_number(n: DensityMap, grid: GridSpec) -> float:
    return float(reduce_density(n, grid, ()).values)


def total_charge(c: DensityMap, grid: GridSpec) -> float:
    return float(reduce_density(c, grid, ()).values)


def coarse_grain(dmap: DensityMap, spec: CoarseGrainSpec,
                 axes=None) -> DensityMap:
    """Discrete Gaussian smearing over grid indices.

    The stencil G_mn = exp(-(di^2 + dj^2)/(2 sigma^2))/Z is truncated at
    |di|, |dj| <= half_width and renormalized.  Near the array edges each
    source cell's mass is rescaled by the in-bounds fraction of its
    clipped stencil before spreading, so the operator is linear, maps
    nonnegative input to nonnegative output and preserves the index-space
    total to round-off.
    """
    if axes is None:
        axes = tuple(range(dmap.values.ndim))
    m = spec.half_width
    x = np.arange(-m, m + 1)
    g1 = np.exp(-x * x / (2.0 * spec.sigma ** 2))
    g1 /= g1.sum()

    vals = dmap.values
    for ax in axes:
        frac = ndimage.correlate1d(np.ones(vals.shape[ax]), g1,
                                   mode="constant", cval=0.0)
        shape = [1] * vals.ndim
        shape[ax] = vals.shape[ax]
        vals = ndimage.correlate1d(vals / frac.reshape(shape), g1, axis=ax,
                                   mode="constant", cval=0.0)
    return DensityMap(vals, dmap.axes,
                      (dmap.note + " " if dmap.note else "") + "coarse-grained")
