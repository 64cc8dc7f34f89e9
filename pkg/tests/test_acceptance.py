"""End-to-end validation battery.

This module runs the full pipeline at desk scale: large solver grids,
oracle cross-checks, and trajectory ensembles.  It is compute-heavy (on
the order of an hour single-core); the per-module unit tests live in the
other test files.
"""

import hashlib
import math
import time

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.signal import argrelmax
from scipy.stats import chisquare, ks_2samp

from pairspace.dhw import DhwSystem, StepperConfig
from pairspace.dop853 import integrate_fixed
from pairspace.fields import FieldParams, kernel_moment, vector_potential
from pairspace.grid import GridSpec
from pairspace.observables import (CoarseGrainSpec, DensityMap,
                                   coarse_grain, marginals, number_density,
                                   reduce_density, total_charge, total_number)
from pairspace.qkt import solve_qkt_grid
from pairspace.trajectory import (ForceToggles, SampleWindow,
                                  creation_peak_times, ensemble_run,
                                  production_probability, propagate_batch,
                                  sample_pairs)

# ---------------------------------------------------------------------------
# helpers


def n_px_marginal(final, grid, field):
    """Marginal spectrum n(p_x), integrated over z and p_z.

    The z-integral (not a z=0 slice) keeps the spectrum invariant under
    the particle streaming that happens between creation and readout.
    """
    n = number_density(final, grid, field)
    return reduce_density(n, grid, ("p_x",)).values, n


def oracle_px(grid, field, t0, t1, n_pz=65):
    """Homogeneous-limit occupation marginal over the same p_x axis."""
    pz = np.linspace(-grid.L_pz, grid.L_pz, n_pz)
    PX, PZ = np.meshgrid(grid.p_x, pz, indexing="ij")
    f, _, _, _ = solve_qkt_grid(PX, PZ, field, t0, t1, rel_tol=1e-8,
                                abs_tol=1e-11)
    return np.trapezoid(f, pz, axis=1)


def l1_shape(a, b, w, sel=None):
    """L1 distance of the two curves after normalizing each to unit mass."""
    if sel is None:
        sel = np.ones(a.shape, bool)
    a = np.maximum(a[sel], 0.0)
    b, w = b[sel], w[sel]
    an = a / np.sum(a * w)
    bn = b / np.sum(b * w)
    return float(np.sum(np.abs(an - bn) * w))


def assert_charge_neutral(states, grid):
    """|Q_total| <= 1e-8 * integral of |charge density| for every state."""
    for st in states:
        axes = (("z", grid.z_phys), ("p_x", grid.p_x), ("p_z", grid.p_z))
        q = total_charge(DensityMap(st.v0, axes), grid)
        absq = float(reduce_density(DensityMap(np.abs(st.v0), axes),
                                    grid, ()).values)
        if absq == 0.0:
            assert q == 0.0
        else:
            assert abs(q) <= 1e-8 * absq, f"t={st.t}: |Q|={abs(q)}, ref={absq}"


def maxima_in_window(curve, px, px_max=1.0, floor_frac=0.0):
    sel = np.abs(px) < px_max
    idx = [int(i) for i in argrelmax(curve)[0] if sel[i]]
    if floor_frac:
        idx = [i for i in idx if curve[i] >= floor_frac * curve.max()]
    return idx


# ---------------------------------------------------------------------------
# expensive shared runs


@pytest.fixture(scope="session")
def quasi_homogeneous_run():
    """Wide pulse on the reduced 128x96x96 grid, with wall-clock timing."""
    # box sizing: L_q covers the full secular-potential sweep (peak |A| is
    # 3.8 here) plus the final support; L_z lets the lam=100 profile decay
    # at the periodic seam.  Dealiasing stays off: the 2/3 filter would
    # delete the physical phase-oscillation modes of the subtracted
    # components, which must survive for the density cancellations.
    grid = GridSpec(n_z=128, n_qx=96, n_pz=96, L_z=300.0, L_q=6.0, L_pz=1.5,
                    dealias_fraction=1.0)
    field = FieldParams(epsilon=0.5, tau=10.0, lam=100.0, omega=0.1, phi=0.0)
    sysm = DhwSystem(grid, field, StepperConfig(rel_tol=1e-6, abs_tol=1e-9))
    t0 = time.perf_counter()
    final, snaps, stats = sysm.evolve(-40.0, 40.0,
                                      snapshot_times=(-20.0, 0.0, 20.0))
    wall = time.perf_counter() - t0
    return dict(grid=grid, field=field, final=final, snaps=snaps,
                stats=stats, wall=wall)


@pytest.fixture(scope="session")
def cep_runs():
    """Narrow pulse at four carrier-envelope phases (32x192x96 grid)."""
    # L_z=30 still holds the lam=10 profile (e-9 at the seam); particles
    # that stream across the periodic seam do not disturb the z-integrated
    # spectra this fixture feeds.  L_pz=3: magnetic deflection at lam=10
    # pushes final |p_z| to ~2.8 (semiclassical tail), and a tighter box
    # wraps that population through the periodic p_z seam
    grid = GridSpec(n_z=32, n_qx=192, n_pz=96, L_z=30.0, L_q=6.0, L_pz=3.0,
                    dealias_fraction=1.0)
    out = {"grid": grid}
    for tag, phi in (("phi0", 0.0), ("phi1_4", math.pi / 4),
                     ("phi1_2", math.pi / 2), ("phi3_4", 3 * math.pi / 4)):
        field = FieldParams(epsilon=0.5, tau=10.0, lam=10.0, omega=0.1,
                            phi=phi)
        sysm = DhwSystem(grid, field,
                         StepperConfig(rel_tol=1e-6, abs_tol=1e-9))
        final, snaps, _ = sysm.evolve(-40.0, 40.0, snapshot_times=(0.0,))
        curve, _ = n_px_marginal(final, grid, field)
        out[tag] = dict(field=field, final=final, snaps=snaps, curve=curve)
    return out


@pytest.fixture(scope="session")
def long_pulse_run():
    """tau=20 pulse, 64x128x96 grid (two-bulk phase-space structure)."""
    # the long pulse gives the magnetic deflection time to push final
    # |p_z| out to ~3.7, so the p_z box must reach 4.5 to avoid wrapping
    grid = GridSpec(n_z=64, n_qx=128, n_pz=96, L_z=60.0, L_q=6.0, L_pz=4.5,
                    dealias_fraction=1.0)
    field = FieldParams(epsilon=0.5, tau=20.0, lam=10.0, omega=0.1, phi=0.0)
    sysm = DhwSystem(grid, field, StepperConfig(rel_tol=1e-6, abs_tol=1e-9))
    final, snaps, _ = sysm.evolve(-80.0, 80.0,
                                  snapshot_times=(-40.0, 0.0, 40.0))
    return dict(grid=grid, field=field, final=final, snaps=snaps)


@pytest.fixture(scope="session")
def spin_ensembles():
    """One event sample propagated under four force configurations."""
    field = FieldParams(epsilon=0.5, tau=20.0, lam=10.0, omega=0.1, phi=0.0)
    window = SampleWindow.for_field(field)
    events, _ = sample_pairs(59_000_000, window, 17, field)
    assert 2 * events.shape[0] >= 100_000    # both species propagated
    cases = {
        "full": ForceToggles(),
        "spin_off": ForceToggles(enable_S=False),
        "dzB_only": ForceToggles(enable_S_dzE=False),
        "dzE_only": ForceToggles(enable_S_dzB=False),
    }
    out = {}
    for name, toggles in cases.items():
        pz_final = []
        for qsign in (1.0, -1.0):
            n = events.shape[0]
            y = np.column_stack([events[:, 1], np.zeros(n), events[:, 2]])
            y, status = propagate_batch(
                y, events[:, 0].copy(), 80.0, np.full(n, qsign),
                np.full(n, -0.5), toggles, field, rtol=1e-8, atol=1e-10)
            assert not np.any(status)
            pz_final.append(y[:, 2])
        out[name] = np.concatenate(pz_final)
    return out


@pytest.fixture(scope="session")
def sampled_events():
    """5e5 accepted creation events for the antisymmetric pulse."""
    field = FieldParams(epsilon=0.5, tau=10.0, lam=10.0, omega=0.1,
                        phi=math.pi / 2)
    window = SampleWindow.for_field(field)
    events, _ = sample_pairs(220_000_000, window, 11, field)
    assert events.shape[0] >= 500_000
    return dict(field=field, window=window, events=events[:500_000])


# ---------------------------------------------------------------------------
# 1. vacuum persistence


def test_vacuum_persistence():
    field = FieldParams(epsilon=0.0, tau=10.0, lam=10.0, omega=0.1)
    grid = GridSpec(n_z=64, n_qx=64, n_pz=64)
    sysm = DhwSystem(grid, field, StepperConfig(dt_init=1.0, dt_max=50.0))
    t0 = time.perf_counter()
    final, _, _ = sysm.evolve(-50.0, 50.0)
    wall = time.perf_counter() - t0
    assert final.max_abs() < 1e-12
    n = number_density(final, grid, field)
    assert abs(total_number(n, grid)) < 1e-12
    assert wall < 60.0


# ---------------------------------------------------------------------------
# 2. charge neutrality on every solver run in the suite


def test_charge_neutrality(quasi_homogeneous_run, cep_runs, long_pulse_run):
    run = quasi_homogeneous_run
    assert_charge_neutral(list(run["snaps"]) + [run["final"]], run["grid"])
    for tag in ("phi0", "phi1_4", "phi1_2", "phi3_4"):
        assert_charge_neutral(list(cep_runs[tag]["snaps"])
                              + [cep_runs[tag]["final"]], cep_runs["grid"])
    assert_charge_neutral(list(long_pulse_run["snaps"])
                          + [long_pulse_run["final"]], long_pulse_run["grid"])


# ---------------------------------------------------------------------------
# 3. kernel-moment closed forms vs adaptive quadrature


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_kernel_moment_quadrature_oracle():
    rng = np.random.default_rng(3)
    n_lam, per = 25, 400                       # 10^4 points total
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(n_lam):
        lam = float(10.0 ** rng.uniform(-0.5, 2.0))
        z = rng.uniform(-3 * lam, 3 * lam, per)
        k = (10.0 ** rng.uniform(-8, 1.5, per)
             * np.where(rng.random(per) < 0.5, -1.0, 1.0))
        k[:20] = rng.uniform(-1e-6, 1e-6, 20)  # force the tiny-k regime
        M = [kernel_moment(order, z, k, lam) for order in range(3)]
        for i in range(per):
            for order in range(3):
                ref, _ = quad(
                    lambda x: x ** order
                    * np.exp(-((z[i] - x * k[i]) / lam) ** 2),
                    -0.5, 0.5, epsabs=1e-15, epsrel=1e-13, limit=200)
                worst = max(worst, abs(M[order][i] - ref))
    assert worst < 1e-12
    assert time.perf_counter() - t0 < 60.0


# ---------------------------------------------------------------------------
# 4. integrator order


def test_integrator_eighth_order_on_linear_system():
    w = 2.0

    def rotation(t, y):
        return np.array([w * y[1], -w * y[0]])

    y0 = np.array([1.0, 0.0])
    T = 2.0
    exact = np.array([np.cos(w * T), -np.sin(w * T)])
    errs = []
    for n in (4, 8, 16, 32):
        y = integrate_fixed(rotation, 0.0, y0, T, n)
        errs.append(np.linalg.norm(y - exact))
    slopes = np.diff(np.log(errs)) / np.log(0.5)
    assert np.all(np.abs(slopes - 8.0) < 0.3), slopes


# ---------------------------------------------------------------------------
# 5. homogeneous-limit equivalence with the kinetic oracle


def test_homogeneous_limit_matches_oracle(quasi_homogeneous_run):
    run = quasi_homogeneous_run
    grid, field = run["grid"], run["field"]
    dhw_curve, _ = n_px_marginal(run["final"], grid, field)
    oracle_curve = oracle_px(grid, field, -40.0, 40.0)
    i_dhw = int(np.argmax(dhw_curve))
    i_oracle = int(np.argmax(oracle_curve))
    assert abs(i_dhw - i_oracle) <= 1          # peak within one grid cell
    # shape comparison over |p_x| <= 2, which holds 99.9% of the reference
    # spectrum's mass; beyond it the reference is ~1e-4 of peak while the
    # reduced grid carries only resolution-limited tail contamination, so
    # including it would compare artifacts, not shapes
    support = np.abs(grid.p_x) <= 2.0
    assert l1_shape(dhw_curve, oracle_curve, grid.w_qx, support) < 0.10
    assert run["wall"] < 7200.0


# ---------------------------------------------------------------------------
# 6. analytic vector-potential map for a quasi-uniform pulse


def test_trajectory_analytic_potential_map():
    field = FieldParams(epsilon=0.5, tau=2.0, lam=1e4, omega=1.0, phi=0.0)
    # narrow z window: over it the spatial profile is constant to ~2e-7, so
    # the potential map must hold to well below the 1e-5 bound
    window = SampleWindow(-6.0, 6.0, -10.0, 10.0, -1.5, 1.5)
    t_end = 6.0
    events, _ = sample_pairs(2_000_000, window, 123, field)
    assert events.shape[0] > 10_000
    toggles = ForceToggles(enable_B=False, enable_S=False)
    for qsign in (1.0, -1.0):
        n = events.shape[0]
        y = np.column_stack([events[:, 1], np.zeros(n), events[:, 2]])
        y, status = propagate_batch(
            y, events[:, 0].copy(), t_end, np.full(n, qsign),
            np.full(n, -0.5), toggles, field, rtol=1e-10, atol=1e-12)
        assert not np.any(status)
        mapped = qsign * (vector_potential(events[:, 0], events[:, 1], field)
                          - vector_potential(t_end, events[:, 1], field))
        assert float(np.max(np.abs(y[:, 1] - mapped))) < 1e-5
        # without a magnetic or spin force p_z is exactly conserved
        assert np.array_equal(y[:, 2], events[:, 2])


# ---------------------------------------------------------------------------
# 7. spin-induced momentum asymmetry and its attribution


def count_asymmetry(pz):
    return float((np.sum(pz > 0) - np.sum(pz < 0)) / pz.size)


def test_spin_asymmetry_and_attribution(spin_ensembles):
    ens = spin_ensembles
    # mirror-symmetry Kolmogorov-Smirnov test on the final p_z sample
    p_off = ks_2samp(ens["spin_off"], -ens["spin_off"]).pvalue
    p_on = ks_2samp(ens["full"], -ens["full"]).pvalue
    assert p_off > 0.01, p_off       # no spin force: statistically symmetric
    assert p_on < 1e-3, p_on         # spin force: symmetry clearly broken
    # attribution: up/down population asymmetry relative to the spin-off
    # baseline propagated from the same creation events
    base = count_asymmetry(ens["spin_off"])
    full = count_asymmetry(ens["full"]) - base
    dzb = count_asymmetry(ens["dzB_only"]) - base
    dze = count_asymmetry(ens["dzE_only"]) - base
    assert abs(dzb / full) > 0.8     # magnetic-gradient term carries it
    assert abs(dze / full) < 0.1     # electric-gradient term does not


# ---------------------------------------------------------------------------
# 8. carrier-envelope-phase interference fringes


def test_cep_interference_fringes(cep_runs):
    grid = cep_runs["grid"]
    # antisymmetric pulse: at least three interference maxima within |px|<1,
    # in both the solver curve and the independent kinetic oracle
    curve = cep_runs["phi1_2"]["curve"]
    assert len(maxima_in_window(curve, grid.p_x)) >= 3
    oracle_curve = oracle_px(grid, cep_runs["phi1_2"]["field"], -40.0, 40.0)
    assert len(maxima_in_window(oracle_curve, grid.p_x)) >= 3
    # symmetric pulse: a single dominant peak
    curve0 = cep_runs["phi0"]["curve"]
    dominant = maxima_in_window(curve0, grid.p_x, floor_frac=0.25)
    assert len(dominant) == 1


# ---------------------------------------------------------------------------
# 9. phase pairs pi/4 and 3*pi/4 produce overlapping spectra


def test_cep_quarter_phase_overlap(cep_runs):
    grid = cep_runs["grid"]
    a = cep_runs["phi1_4"]["curve"]
    b = cep_runs["phi3_4"]["curve"]
    num = np.sum(np.abs(a - b) * grid.w_qx)
    den = 0.5 * np.sum((np.abs(a) + np.abs(b)) * grid.w_qx)
    assert num / den < 0.05


# ---------------------------------------------------------------------------
# 10. coarse-graining contract on the long-pulse phase-space map


def test_coarse_graining_contract(long_pulse_run):
    run = long_pulse_run
    grid, field = run["grid"], run["field"]
    nmap = number_density(run["final"], grid, field)
    zpz = marginals(nmap, grid)["z,p_z"]
    spec = CoarseGrainSpec(sigma=2.5, half_width=6)
    smooth = coarse_grain(zpz, spec)
    # exact mass preservation
    assert float(np.sum(smooth.values)) == pytest.approx(
        float(np.sum(zpz.values)), rel=1e-12)
    # a delta input responds with the (truncated, renormalized) stencil
    delta = np.zeros_like(zpz.values)
    delta[delta.shape[0] // 2, delta.shape[1] // 2] = 1.0
    resp = coarse_grain(DensityMap(delta, zpz.axes), spec).values
    offsets = np.arange(-spec.half_width, spec.half_width + 1)
    g = np.exp(-0.5 * (offsets / spec.sigma) ** 2)
    expected = np.outer(g, g) / np.outer(g, g).sum()
    got = resp[delta.shape[0] // 2 - spec.half_width:
               delta.shape[0] // 2 + spec.half_width + 1,
               delta.shape[1] // 2 - spec.half_width:
               delta.shape[1] // 2 + spec.half_width + 1]
    np.testing.assert_allclose(got, expected, atol=1e-14)
    assert float(np.sum(resp)) == pytest.approx(1.0, rel=1e-12)
    # smearing removes the central-band quantum oscillations (the raw map
    # dips negative there) while moving the bulk peaks only mildly
    band = np.abs(grid.p_z) < 0.3
    neg_raw = max(0.0, -float(zpz.values[:, band].min()))
    neg_smooth = max(0.0, -float(smooth.values[:, band].min()))
    assert neg_raw > 0.0
    assert neg_smooth < neg_raw / 10.0
    peak_change = abs(float(smooth.values.max()) - float(zpz.values.max())) \
        / float(zpz.values.max())
    assert peak_change < 0.15


# ---------------------------------------------------------------------------
# 11. rejection-sampler fidelity


def test_sampler_chi2_and_peak_balance(sampled_events):
    field = sampled_events["field"]
    w = sampled_events["window"]
    events = sampled_events["events"]
    # chi-squared on the (t, z) histogram against the integrated rate
    nb, sub = 24, 8
    H, _, _ = np.histogram2d(events[:, 0], events[:, 1], bins=[nb, nb],
                             range=[[w.t_min, w.t_max], [w.z_min, w.z_max]])
    tq = np.linspace(w.t_min, w.t_max, nb * sub + 1)
    tq = 0.5 * (tq[:-1] + tq[1:])
    zq = np.linspace(w.z_min, w.z_max, nb * sub + 1)
    zq = 0.5 * (zq[:-1] + zq[1:])
    expected = np.zeros((tq.size, zq.size))
    for pz in np.linspace(w.pz_min, w.pz_max, 65):
        expected += production_probability(tq[:, None], zq[None, :], pz,
                                           field)
    expected = expected.reshape(nb, sub, nb, sub).sum(axis=(1, 3))
    expected *= events.shape[0] / expected.sum()
    mask = expected >= 10.0
    obs, exp = H[mask], expected[mask]
    exp *= obs.sum() / exp.sum()
    _, pvalue = chisquare(obs, exp)
    assert pvalue > 0.01, pvalue
    # the two dominant creation bursts contribute equally within 1%
    peaks = creation_peak_times(field, w)
    labels = np.argmin(np.abs(events[:, 0:1] - peaks[None, :]), axis=1)
    counts = np.sort(np.bincount(labels, minlength=peaks.size))[-2:]
    assert abs(counts[0] - counts[1]) / counts.mean() < 0.01


# ---------------------------------------------------------------------------
# 12. determinism across worker counts


def test_fixed_seed_runs_are_checksum_identical_across_workers():
    field = FieldParams(epsilon=0.5, tau=2.0, lam=5.0, omega=1.0, phi=0.0)
    digests = []
    for workers in (1, 4, 16):
        res = ensemble_run(field, 200_000, 6.0, seed=42, workers=workers,
                           ode_tol=1e-8)
        h = hashlib.sha256()
        h.update(res.events.tobytes())
        h.update(res.electrons.tobytes())
        h.update(res.positrons.tobytes())
        digests.append(h.hexdigest())
    assert len(set(digests)) == 1
