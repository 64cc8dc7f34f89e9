"""Semi-classical trajectory Monte Carlo model.

Pairs are created by rejection sampling from the locally-constant-field
production rate

    P(t, z, p_z) = (a / 4 pi^3) * exp(-pi (1 + p_z^2) / a),

with a the secular field strength (zero where the field is magnetically
dominated, which forbids pair creation).  Each accepted event spawns an
electron and a positron at the same point with p_x = 0 and the sampled
p_z; both are propagated through the relativistic equations of motion
with a Foldy-Wouthuysen spin force, every force term individually
toggleable.  Smooth densities are estimated from the final points by
kernel density estimation.

The model carries no quantum phase information and therefore cannot
produce interference fringes; it complements the full phase-space
solver, which can.

The per-particle integrator exists twice: a compiled extension and a
vectorized NumPy fallback, selected at import (set
PAIRSPACE_FORCE_PYTHON=1 to force the fallback).  Both integrate each
particle independently with its own adaptive step, so results are
bit-identical no matter how a batch is split across workers.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage
from scipy.signal import argrelmax

from . import fields as fld
from .fields import FieldParams
from .observables import DensityMap

try:
    if os.environ.get("PAIRSPACE_FORCE_PYTHON"):
        raise ImportError("fallback forced via PAIRSPACE_FORCE_PYTHON")
    from . import _traj_kernel
    HAVE_COMPILED_KERNEL = True
except ImportError:  # pragma: no cover - depends on build environment
    _traj_kernel = None
    HAVE_COMPILED_KERNEL = False

__all__ = [
    "Particle",
    "ForceToggles",
    "SampleWindow",
    "EnsembleResult",
    "HAVE_COMPILED_KERNEL",
    "production_probability",
    "sample_pairs",
    "force",
    "propagate",
    "propagate_batch",
    "kde_density",
    "creation_peak_times",
    "ensemble_run",
]


@dataclass
class Particle:
    """One semi-classical particle: creation data plus evolving point."""

    t0: float
    z: float
    p_x: float
    p_z: float
    s: float = -0.5
    charge_sign: int = -1

    def __post_init__(self):
        if self.s not in (-0.5, 0.5, 0.0):
            raise ValueError("spin must be +-1/2 (or 0 to disable)")
        if self.charge_sign not in (-1, 1):
            raise ValueError("charge_sign must be -1 or +1")

    @property
    def gamma(self):
        return math.sqrt(1.0 + self.p_x ** 2 + self.p_z ** 2)


@dataclass(frozen=True)
class ForceToggles:
    """Per-term switches for the equations of motion.

    The spin sub-toggles only matter when enable_S is set.
    """

    enable_E: bool = True
    enable_B: bool = True
    enable_S: bool = True
    enable_S_dzB: bool = True
    enable_S_dzE: bool = True


@dataclass(frozen=True)
class SampleWindow:
    """Proposal box for rejection sampling of creation events."""

    t_min: float
    t_max: float
    z_min: float
    z_max: float
    pz_min: float = -1.5
    pz_max: float = 1.5

    @classmethod
    def for_field(cls, p: FieldParams, pz_half=1.5):
        """Default box: the rate is negligible outside +-3 envelopes."""
        return cls(-3.0 * p.tau, 3.0 * p.tau, -3.0 * p.lam, 3.0 * p.lam,
                   -pz_half, pz_half)


def production_probability(t, z, p_z, params: FieldParams):
    """Instantaneous pair-production rate density."""
    a = fld.secular_a(t, z, params)
    p_z = np.asarray(p_z, dtype=float)
    out = np.zeros(np.broadcast_shapes(np.shape(a), p_z.shape))
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (a / (4.0 * np.pi ** 3)) * np.exp(
            -np.pi * (1.0 + p_z * p_z) / np.where(a > 0, a, 1.0)
        )
    np.copyto(out, np.where(a > 0, val, 0.0))
    return float(out) if out.ndim == 0 else out


def _scan_max_probability(window: SampleWindow, params: FieldParams,
                          n_t=256, n_z=256, n_pz=64):
    t = np.linspace(window.t_min, window.t_max, n_t)
    z = np.linspace(window.z_min, window.z_max, n_z)
    # the rate decreases monotonically in |p_z|; still scan a few values
    pz = np.linspace(0.0, max(abs(window.pz_min), abs(window.pz_max)), n_pz)
    P = production_probability(t[:, None], z[None, :], 0.0, params)
    # p_z only enters through the Gaussian factor, max is at smallest |p_z|
    pz0 = pz[np.argmin(np.abs(pz))]
    if pz0 != 0.0:
        P = production_probability(t[:, None], z[None, :], pz0, params)
    return float(P.max())


def sample_pairs(n_attempts, window: SampleWindow, rng_seed,
                 params: FieldParams, chunk=1_000_000):
    """Rejection-sample creation events from the production rate.

    Proposals are drawn uniformly over the window in fixed-size chunks
    from a counter-based generator, so the accepted list depends only on
    the seed.  Returns (events, acceptance_rate) with events of shape
    (n_accepted, 3) holding (t0, z0, p_z0).
    """
    n_attempts = int(n_attempts)
    if n_attempts < 1:
        raise ValueError("n_attempts must be >= 1")
    p_max = 1.01 * _scan_max_probability(window, params)
    rng = np.random.Generator(np.random.Philox(rng_seed))
    accepted = []
    done = 0
    while done < n_attempts:
        m = min(chunk, n_attempts - done)
        u = rng.random((4, m))
        t = window.t_min + (window.t_max - window.t_min) * u[0]
        z = window.z_min + (window.z_max - window.z_min) * u[1]
        pz = window.pz_min + (window.pz_max - window.pz_min) * u[2]
        if p_max > 0.0:
            rho = p_max * u[3]
            keep = production_probability(t, z, pz, params) > rho
            accepted.append(np.column_stack([t[keep], z[keep], pz[keep]]))
        done += m
    events = (np.concatenate(accepted) if accepted
              else np.empty((0, 3)))
    rate = events.shape[0] / n_attempts
    if events.shape[0] == 0 and params.epsilon > 0:
        warnings.warn(
            "no events accepted; the sampling window is probably "
            "misplaced relative to the field support", stacklevel=2)
    return events, rate


def force(t, particle: Particle, toggles: ForceToggles, params: FieldParams):
    """(dp_x/dt, dp_z/dt) for one particle at time t."""
    z = particle.z
    q = particle.charge_sign
    gam = particle.gamma
    E = float(fld.electric_field(t, z, params))
    B = float(fld.magnetic_field(t, z, params))
    dzE, dzB = (float(v) for v in fld.field_gradients(t, z, params))
    fx = 0.0
    if toggles.enable_B:
        fx -= (particle.p_z / gam) * B
    if toggles.enable_E:
        fx += E
    fx *= q
    fz = 0.0
    if toggles.enable_B:
        fz += q * (particle.p_x / gam) * B
    if toggles.enable_S:
        spin = particle.s / gam
        if toggles.enable_S_dzB:
            fz += spin * dzB
        if toggles.enable_S_dzE:
            fz -= spin * (particle.p_z / (gam + 1.0)) * dzE
    return fx, fz


# -- batch propagation -------------------------------------------------------

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_DP_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                  -17253 / 339200, 22 / 525, -1 / 40])


def _deriv_numpy(t, y, q, s, toggles: ForceToggles, p: FieldParams):
    # y: (n, 3) rows (z, p_x, p_z); t: (n,)
    z, px, pz = y[:, 0], y[:, 1], y[:, 2]
    gam = np.sqrt(1.0 + px * px + pz * pz)
    E = fld.electric_field(t, z, p)
    B = fld.magnetic_field(t, z, p)
    dzE, dzB = fld.field_gradients(t, z, p)
    out = np.empty_like(y)
    out[:, 0] = pz / gam
    fx = np.zeros_like(z)
    if toggles.enable_B:
        fx -= (pz / gam) * B
    if toggles.enable_E:
        fx += E
    out[:, 1] = q * fx
    fz = np.zeros_like(z)
    if toggles.enable_B:
        fz += q * (px / gam) * B
    if toggles.enable_S:
        if toggles.enable_S_dzB:
            fz += (s / gam) * dzB
        if toggles.enable_S_dzE:
            fz -= (s / gam) * (pz / (gam + 1.0)) * dzE
    out[:, 2] = fz
    return out


def _propagate_batch_numpy(y, t0, t_end, qsign, spin, toggles, params,
                           rtol, atol, dt_min):
    """Vectorized fallback with per-particle adaptive steps.

    Every particle carries its own time and step size; finished rows are
    frozen.  Row i follows exactly the trajectory it would follow alone.
    """
    n = y.shape[0]
    t = t0.astype(float).copy()
    dt = np.minimum(1e-2, np.maximum(t_end - t, 0.0))
    status = np.zeros(n, dtype=np.int64)
    active = t < t_end
    K = np.zeros((7, n, 3))
    K[0][active] = _deriv_numpy(t[active], y[active], qsign[active],
                                spin[active], toggles, params)
    while np.any(active):
        idx = np.flatnonzero(active)
        under = idx[dt[idx] < dt_min]
        if under.size:
            status[under] = 1
            active[under] = False
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
        h = dt[idx].copy()
        last = t[idx] + h >= t_end
        h[last] = t_end - t[idx][last]
        ya = y[idx]
        for i in range(1, 7):
            yi = ya + h[:, None] * np.einsum(
                "j,jnm->nm", _DP_A[i, :i], K[:i][:, idx, :])
            K[i, idx] = _deriv_numpy(t[idx] + _DP_C[i] * h, yi,
                                     qsign[idx], spin[idx], toggles, params)
        y_new = yi  # the final A-row is the 5th-order solution (FSAL)
        e = h[:, None] * np.einsum("j,jnm->nm", _DP_E, K[:, idx, :])
        sc = atol + rtol * np.maximum(np.abs(ya), np.abs(y_new))
        err = np.sqrt(np.mean((e / sc) ** 2, axis=1))
        ok = err <= 1.0
        with np.errstate(divide="ignore"):
            fac = np.where(err > 0, 0.9 * err ** -0.2, 10.0)
        fac = np.clip(fac, 0.2, 10.0)
        acc = idx[ok]
        t[acc] = np.where(last[ok], t_end, t[acc] + h[ok])
        y[acc] = y_new[ok]
        K[0, acc] = K[6, acc]
        dt[idx] = np.abs(h) * fac
        finished = acc[t[acc] >= t_end]
        active[finished] = False
    return status


def propagate_batch(y, t0, t_end, qsign, spin, toggles: ForceToggles,
                    params: FieldParams, rtol=1e-10, atol=1e-12,
                    dt_min=1e-12):
    """Propagate an (n, 3) batch of (z, p_x, p_z) rows in place."""
    y = np.ascontiguousarray(y, dtype=float)
    t0 = np.ascontiguousarray(t0, dtype=float)
    qsign = np.ascontiguousarray(qsign, dtype=float)
    spin = np.ascontiguousarray(spin, dtype=float)
    if HAVE_COMPILED_KERNEL:
        status = _traj_kernel.propagate_batch(
            y, t0, float(t_end), qsign, spin,
            params.epsilon, params.tau, params.lam, params.omega, params.phi,
            int(toggles.enable_E), int(toggles.enable_B),
            int(toggles.enable_S), int(toggles.enable_S_dzB),
            int(toggles.enable_S_dzE), rtol, atol, dt_min)
    else:
        status = _propagate_batch_numpy(y, t0, t_end, qsign, spin, toggles,
                                        params, rtol, atol, dt_min)
    return y, status


def propagate(particle: Particle, t_end, toggles: ForceToggles,
              params: FieldParams, ode_tol=1e-10) -> Particle:
    """Propagate a single particle to t_end (creation state unchanged)."""
    if particle.t0 > t_end:
        raise ValueError("t_end must be >= creation time")
    y = np.array([[particle.z, particle.p_x, particle.p_z]])
    y, status = propagate_batch(
        y, np.array([particle.t0]), t_end,
        np.array([float(particle.charge_sign)]), np.array([particle.s]),
        toggles, params, rtol=ode_tol, atol=ode_tol * 1e-2)
    if status[0] != 0:
        raise RuntimeError(f"step size underflow for particle at t0 = "
                           f"{particle.t0:.6g}")
    return Particle(t0=particle.t0, z=float(y[0, 0]), p_x=float(y[0, 1]),
                    p_z=float(y[0, 2]), s=particle.s,
                    charge_sign=particle.charge_sign)


# -- density estimation ------------------------------------------------------

def _silverman_bandwidth(x, d=2):
    sig = np.std(x)
    iqr = np.subtract(*np.percentile(x, [75, 25])) / 1.349
    spread = min(sig, iqr) if iqr > 0 else sig
    n = x.size
    return spread * (4.0 / ((d + 2.0) * n)) ** (1.0 / (d + 4.0))


def kde_density(points, axes, bandwidth=None) -> DensityMap:
    """Gaussian product-kernel density estimate on a uniform 2-D grid.

    points : (n, 2) coordinates; axes : ((name, array), (name, array))
    with uniformly spaced arrays; bandwidth : pair of kernel widths in
    physical units, or None for Silverman's rule per axis.

    Implemented as linear (cloud-in-cell) binning followed by a Gaussian
    convolution, then rescaled so the map integrates to the number of
    points regardless of bandwidth.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] < 2:
        raise ValueError("need at least two 2-D points")
    coords = [np.asarray(a[1], dtype=float) for a in axes]
    steps = []
    for c in coords:
        dc = np.diff(c)
        if c.size < 4 or not np.allclose(dc, dc[0]):
            raise ValueError("KDE output axes must be uniform")
        steps.append(float(dc[0]))
    if bandwidth is None:
        bandwidth = [_silverman_bandwidth(points[:, i]) for i in range(2)]
    bandwidth = [max(float(b), step) for b, step in zip(bandwidth, steps)]

    hist = np.zeros((coords[0].size, coords[1].size))
    fi = [(points[:, i] - coords[i][0]) / steps[i] for i in range(2)]
    i0 = [np.clip(np.floor(f).astype(int), 0, coords[i].size - 2)
          for i, f in enumerate(fi)]
    w = [np.clip(fi[i] - i0[i], 0.0, 1.0) for i in range(2)]
    for di in (0, 1):
        for dj in (0, 1):
            ww = (w[0] if di else 1 - w[0]) * (w[1] if dj else 1 - w[1])
            np.add.at(hist, (i0[0] + di, i0[1] + dj), ww)
    sig = [b / s for b, s in zip(bandwidth, steps)]
    dens = ndimage.gaussian_filter(hist, sig, mode="constant", truncate=6.0)
    cell = steps[0] * steps[1]
    total = dens.sum() * cell
    if total > 0:
        dens *= points.shape[0] / total
    return DensityMap(dens, tuple(axes), "KDE")


# -- full pipeline -----------------------------------------------------------

def creation_peak_times(params: FieldParams, window: SampleWindow):
    """Times of the local maxima of |E(t, 0)| inside the window."""
    t = np.linspace(window.t_min, window.t_max, 8192)
    absE = np.abs(fld.electric_field(t, 0.0, params))
    idx = argrelmax(absE)[0]
    idx = idx[absE[idx] > 1e-3 * absE.max()]
    return t[idx]


@dataclass
class EnsembleResult:
    events: np.ndarray          # (n, 3) accepted (t0, z0, pz0)
    acceptance_rate: float
    peak_times: np.ndarray
    peak_labels: np.ndarray     # (n,) index into peak_times
    electrons: np.ndarray       # (n, 3) final (z, p_x, p_z)
    positrons: np.ndarray
    kde_total: DensityMap | None
    kde_per_peak: dict


def ensemble_run(params: FieldParams, n_attempts, t_end, seed,
                 toggles: ForceToggles = ForceToggles(),
                 window: SampleWindow | None = None, spin=-0.5,
                 kde_axes=None, bandwidth=None, workers=1,
                 ode_tol=1e-10) -> EnsembleResult:
    """Sample, propagate both species in parallel, label and estimate.

    Deterministic for a fixed seed: sampling uses a counter-based
    generator and propagation is per-particle independent, so the result
    does not depend on ``workers``.
    """
    if window is None:
        window = SampleWindow.for_field(params)
    events, rate = sample_pairs(n_attempts, window, seed, params)
    n = events.shape[0]
    peaks = creation_peak_times(params, window)
    labels = (np.argmin(np.abs(events[:, 0:1] - peaks[None, :]), axis=1)
              if n and peaks.size else np.zeros(n, dtype=int))

    finals = {}
    for name, qs in (("electrons", -1.0), ("positrons", +1.0)):
        y = np.column_stack([events[:, 1], np.zeros(n), events[:, 2]])
        t0 = events[:, 0].copy()
        qsign = np.full(n, qs)
        sarr = np.full(n, spin)
        if n and workers > 1:
            bounds = np.linspace(0, n, workers + 1).astype(int)
            chunks = [(y[a:b], t0[a:b], qsign[a:b], sarr[a:b])
                      for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
            with ThreadPoolExecutor(max_workers=workers) as ex:
                futs = [ex.submit(propagate_batch, cy, ct0, t_end, cq, cs,
                                  toggles, params, rtol=ode_tol,
                                  atol=ode_tol * 1e-2)
                        for cy, ct0, cq, cs in chunks]
                parts = [f.result() for f in futs]
            y = np.concatenate([p[0] for p in parts]) if parts else y
            status = np.concatenate([p[1] for p in parts]) if parts else \
                np.zeros(0, dtype=np.int64)
        else:
            y, status = propagate_batch(y, t0, t_end, qsign, sarr, toggles,
                                        params, rtol=ode_tol,
                                        atol=ode_tol * 1e-2)
        if np.any(status != 0):
            raise RuntimeError(f"{int(np.sum(status != 0))} {name} hit step "
                               "size underflow")
        finals[name] = y

    kde_total = None
    kde_per_peak = {}
    if kde_axes is not None and n >= 2:
        pts = np.concatenate([finals["electrons"][:, [1, 2]],
                              finals["positrons"][:, [1, 2]]])
        kde_total = kde_density(pts, kde_axes, bandwidth)
        for lab in np.unique(labels):
            sel = labels == lab
            if np.sum(sel) >= 2:
                pts_l = np.concatenate([finals["electrons"][sel][:, [1, 2]],
                                        finals["positrons"][sel][:, [1, 2]]])
                kde_per_peak[int(lab)] = kde_density(pts_l, kde_axes,
                                                     bandwidth)
    return EnsembleResult(
        events=events, acceptance_rate=rate, peak_times=peaks,
        peak_labels=labels, electrons=finals["electrons"],
        positrons=finals["positrons"], kde_total=kde_total,
        kde_per_peak=kde_per_peak)
