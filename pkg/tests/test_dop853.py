"""Adaptive high-order Runge-Kutta stepper."""

import numpy as np
import pytest

from pairspace.dop853 import (Dop853, StepControl, StepUnderflowError,
                              integrate_fixed)


def decay(t, y):
    return -y


def oscillator(t, y):
    # y = (q, p), H = (q^2 + p^2)/2
    return np.array([y[1], -y[0]])


class TestAdaptiveSolve:
    def test_exponential_decay(self):
        solver = Dop853(decay, StepControl(rel_tol=1e-10, abs_tol=1e-12))
        t, y = solver.solve(0.0, np.array([1.0]), 5.0)
        assert t == pytest.approx(5.0, abs=1e-12)
        assert y[0] == pytest.approx(np.exp(-5.0), rel=1e-9)
        assert solver.n_accepted > 0

    def test_oscillator_energy(self):
        solver = Dop853(oscillator, StepControl(rel_tol=1e-11, abs_tol=1e-13))
        _, y = solver.solve(0.0, np.array([1.0, 0.0]), 40.0)
        assert y[0] ** 2 + y[1] ** 2 == pytest.approx(1.0, rel=1e-9)
        np.testing.assert_allclose(y, [np.cos(40.0), -np.sin(40.0)],
                                   atol=1e-8)

    def test_tighter_tolerance_reduces_error(self):
        errs = []
        for tol in (1e-5, 1e-8, 1e-11):
            solver = Dop853(decay, StepControl(rel_tol=tol, abs_tol=tol * 1e-2))
            _, y = solver.solve(0.0, np.array([1.0]), 3.0)
            errs.append(abs(y[0] - np.exp(-3.0)))
        assert errs[0] > errs[1] > errs[2] or errs[2] < 1e-13

    def test_snapshots_land_exactly(self):
        seen = []
        solver = Dop853(decay, StepControl(rel_tol=1e-9, abs_tol=1e-11))
        solver.solve(0.0, np.array([1.0]), 2.0,
                     snapshot_times=(0.5, 1.5),
                     snapshot_cb=lambda t, y: seen.append((t, y[0])))
        assert [t for t, _ in seen] == pytest.approx([0.5, 1.5], abs=1e-12)
        for t, v in seen:
            assert v == pytest.approx(np.exp(-t), rel=1e-9)

    def test_zero_rhs_takes_maximal_steps(self):
        solver = Dop853(lambda t, y: np.zeros_like(y),
                        StepControl(dt_init=0.5, dt_max=5.0))
        _, y = solver.solve(0.0, np.array([3.0]), 100.0)
        assert y[0] == 3.0
        assert solver.n_accepted <= 25

    def test_step_underflow_raises(self):
        # derivative grows without bound before t = 1: forced failure
        def blowup(t, y):
            return y / (1.0 - t)

        solver = Dop853(blowup, StepControl(rel_tol=1e-10, abs_tol=1e-12,
                                            dt_min=1e-8))
        with pytest.raises(StepUnderflowError):
            solver.solve(0.0, np.array([1.0]), 2.0)

    def test_control_validation(self):
        with pytest.raises(ValueError):
            StepControl(rel_tol=0.0)
        with pytest.raises(ValueError):
            StepControl(dt_init=1e-15, dt_min=1e-12)


class TestFixedStepOrder:
    def test_halving_study_shows_eighth_order(self):
        # nonlinear scalar problem with known solution y = 1/(1 - t)
        def fun(t, y):
            return y * y

        y0 = np.array([1.0])
        errs = []
        ns = [4, 8, 16]   # errors stay well above round-off on these grids
        for n in ns:
            y = integrate_fixed(fun, 0.0, y0, 0.5, n)
            errs.append(abs(y[0] - 2.0))
        slopes = np.diff(np.log(errs)) / np.log(0.5)
        assert np.all(np.abs(slopes - 8.0) < 0.4)

    def test_exact_on_degree_seven_polynomial(self):
        # an 8th-order method integrates y' = 8 t^7 without truncation error
        y = integrate_fixed(lambda t, y: np.array([8.0 * t ** 7]),
                            0.0, np.array([0.0]), 1.0, 3)
        assert y[0] == pytest.approx(1.0, rel=1e-13)
