"""Density maps, reductions and the smearing operator."""

import numpy as np
import pytest

from pairspace.dhw import WignerState
from pairspace.fields import FieldParams
from pairspace.grid import GridSpec
from pairspace.observables import (CoarseGrainSpec, DensityMap,
                                   charge_density, coarse_grain, marginals,
                                   number_density, reduce_density,
                                   species_split, total_charge, total_number)

GRID = GridSpec(n_z=8, n_qx=16, n_pz=12)
FIELD = FieldParams(epsilon=0.5, tau=2.0, lam=10.0, omega=1.0)


def random_state(t=40.0, seed=0):
    rng = np.random.default_rng(seed)
    return WignerState(*(rng.standard_normal(GRID.shape) for _ in range(4)),
                       t=t)


class TestDensityMap:
    def test_axis_validation(self):
        with pytest.raises(ValueError):
            DensityMap(np.zeros((3, 3)), (("x", np.arange(3)),))
        with pytest.raises(ValueError):
            DensityMap(np.zeros(3), (("x", np.array([0.0, 2.0, 1.0])),))
        with pytest.raises(ValueError):
            DensityMap(np.zeros(3), (("x", np.arange(4)),))


class TestDensities:
    def test_vacuum_state_has_no_particles(self):
        st = WignerState.zeros(GRID, 40.0)
        n = number_density(st, GRID, FIELD)
        assert np.all(n.values == 0.0)
        assert total_number(n, GRID) == 0.0

    def test_number_density_formula(self):
        st = random_state()
        n = number_density(st, GRID, FIELD).values
        px = GRID.p_x[None, :, None]
        pz = GRID.p_z[None, None, :]
        w = np.sqrt(1.0 + px ** 2 + pz ** 2)
        np.testing.assert_allclose(
            n, (st.s + px * st.v1 + pz * st.v3) / w, rtol=1e-14)

    def test_charge_density_is_time_component(self):
        st = random_state()
        np.testing.assert_array_equal(charge_density(st, GRID, FIELD).values,
                                      st.v0)

    def test_requires_asymptotic_time(self):
        # pick a time where the potential is still large (A vanishes at t=0)
        st = random_state(t=1.5)
        with pytest.raises(ValueError, match="asymptotic"):
            number_density(st, GRID, FIELD)

    def test_species_sum_to_number(self):
        st = random_state()
        n = number_density(st, GRID, FIELD)
        c = charge_density(st, GRID, FIELD)
        f_minus, f_plus = species_split(n, c)
        np.testing.assert_allclose(f_minus.values + f_plus.values, n.values,
                                   rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(f_plus.values - f_minus.values, c.values,
                                   rtol=1e-12, atol=1e-15)


class TestReductions:
    def test_reduce_matches_manual_sum(self):
        st = random_state()
        n = number_density(st, GRID, FIELD)
        w = (GRID.w_z[:, None, None] * GRID.w_qx[None, :, None]
             * GRID.w_pz[None, None, :])
        assert total_number(n, GRID) == pytest.approx(
            float(np.sum(n.values * w)), rel=1e-13)
        marg = reduce_density(n, GRID, ("p_x",))
        manual = np.einsum("zqp,z,p->q", n.values, GRID.w_z, GRID.w_pz)
        np.testing.assert_allclose(marg.values, manual, rtol=1e-13)
        assert marg.axis_names == ("p_x",)

    def test_marginals_are_consistent(self):
        st = random_state()
        n = number_density(st, GRID, FIELD)
        m = marginals(n, GRID)
        total = total_number(n, GRID)
        assert float(np.sum(m["p_x"].values * GRID.w_qx)) == pytest.approx(
            total, rel=1e-12)
        assert float(np.sum(m["p_x,p_z"].values * GRID.w_qx[:, None]
                            * GRID.w_pz[None, :])) == pytest.approx(
            total, rel=1e-12)

    def test_unknown_axis_rejected(self):
        st = random_state()
        n = number_density(st, GRID, FIELD)
        with pytest.raises(ValueError):
            reduce_density(n, GRID, ("p_y",))

    def test_total_charge_of_random_charge_map(self):
        st = random_state()
        c = charge_density(st, GRID, FIELD)
        w = (GRID.w_z[:, None, None] * GRID.w_qx[None, :, None]
             * GRID.w_pz[None, None, :])
        assert total_charge(c, GRID) == pytest.approx(
            float(np.sum(st.v0 * w)), rel=1e-13)


class TestCoarseGrain:
    def axes2d(self, shape):
        return (("z", np.arange(shape[0], dtype=float)),
                ("p_z", np.arange(shape[1], dtype=float)))

    def test_mass_preserved_to_round_off(self):
        rng = np.random.default_rng(5)
        vals = rng.standard_normal((40, 30))
        dm = DensityMap(vals, self.axes2d(vals.shape))
        sm = coarse_grain(dm, CoarseGrainSpec(sigma=3.0, half_width=6))
        assert float(np.sum(sm.values)) == pytest.approx(
            float(np.sum(vals)), abs=1e-12 * np.abs(vals).sum())

    def test_delta_becomes_truncated_gaussian(self):
        vals = np.zeros((41, 41))
        vals[20, 20] = 1.0
        dm = DensityMap(vals, self.axes2d(vals.shape))
        spec = CoarseGrainSpec(sigma=2.0, half_width=5)
        sm = coarse_grain(dm, spec).values
        x = np.arange(-5, 6)
        g = np.exp(-x * x / (2.0 * spec.sigma ** 2))
        g /= g.sum()
        expected = np.zeros_like(vals)
        expected[15:26, 15:26] = np.outer(g, g)
        np.testing.assert_allclose(sm, expected, atol=1e-15)

    def test_positivity_and_linearity(self):
        rng = np.random.default_rng(6)
        a = np.abs(rng.standard_normal((20, 20)))
        b = np.abs(rng.standard_normal((20, 20)))
        spec = CoarseGrainSpec(sigma=2.5, half_width=6)
        axes = self.axes2d(a.shape)
        sa = coarse_grain(DensityMap(a, axes), spec).values
        sb = coarse_grain(DensityMap(b, axes), spec).values
        sab = coarse_grain(DensityMap(a + 2.0 * b, axes), spec).values
        assert np.all(sa >= 0.0)
        np.testing.assert_allclose(sab, sa + 2.0 * sb, rtol=1e-12)

    def test_single_axis_smearing(self):
        vals = np.zeros((21, 21))
        vals[10, 10] = 1.0
        dm = DensityMap(vals, self.axes2d(vals.shape))
        sm = coarse_grain(dm, CoarseGrainSpec(sigma=2.0, half_width=4),
                          axes=(0,)).values
        assert np.all(sm[:, :10] == 0.0) and np.all(sm[:, 11:] == 0.0)
        assert float(sm.sum()) == pytest.approx(1.0, rel=1e-14)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            CoarseGrainSpec(sigma=0.0)
        with pytest.raises(ValueError):
            CoarseGrainSpec(half_width=0)
