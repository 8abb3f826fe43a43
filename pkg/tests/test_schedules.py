import numpy as np
import pytest

from lrsdp import StepSchedule, next_eta, symmetrize


def test_fixed_always_returns_eta():
    sched = StepSchedule.fixed(0.01)
    assert next_eta(sched, 5, None, None, None, None) == 0.01
    x = np.eye(3)
    assert next_eta(sched, 5, x, 2 * x, x, 2 * x) == 0.01


def test_first_iteration_uses_eta0():
    sched = StepSchedule.bb(0.125)
    assert next_eta(sched, 10, np.eye(2), None, np.eye(2), None) == 0.125


def test_proportional_gradient_closed_form(rng):
    # dX = D and dg = c D give eta = 1 / (m c) for the bb rule.
    d = symmetrize(rng.standard_normal((4, 4)))
    c = 3.5
    x_prev = symmetrize(rng.standard_normal((4, 4)))
    g_prev = symmetrize(rng.standard_normal((4, 4)))
    sched = StepSchedule.bb(1.0)
    eta = next_eta(sched, 7, x_prev + d, x_prev, g_prev + c * d, g_prev)
    assert eta == pytest.approx(1.0 / (7 * c), rel=1e-12)


def test_sbb_formula_direct(rng):
    d = symmetrize(rng.standard_normal((3, 3)))
    g = symmetrize(rng.standard_normal((3, 3)))
    x0 = symmetrize(rng.standard_normal((3, 3)))
    g0 = symmetrize(rng.standard_normal((3, 3)))
    eps, m = 1e-3, 4
    sched = StepSchedule.sbb(1.0, eps)
    eta = next_eta(sched, m, x0 + d, x0, g0 + g, g0)
    dsq = float(np.sum(d * d))
    expected = dsq / (m * (abs(float(np.sum(d * g))) + eps * dsq))
    assert eta == pytest.approx(expected, rel=1e-14)


def test_degenerate_denominator_falls_back_to_previous():
    sched = StepSchedule.bb(0.5)
    x = np.eye(3)
    g = np.eye(3)
    first = next_eta(sched, 2, x, None, g, None)
    assert first == 0.5
    # identical anchors: zero numerator and denominator
    eta = next_eta(sched, 2, x, x, g, g)
    assert eta == 0.5


def test_bb_is_sbb_with_zero_epsilon():
    assert StepSchedule.bb(1.0).epsilon == 0.0
    sched = StepSchedule(kind="bb", eta0=1.0, epsilon=0.7)
    assert sched.epsilon == 0.0


def test_reset_clears_state():
    sched = StepSchedule.sbb(0.1, 1e-8)
    sched.last_eta = 42.0
    fresh = sched.reset()
    assert fresh.last_eta is None
    assert fresh.eta0 == 0.1 and fresh.epsilon == 1e-8


def test_validation():
    with pytest.raises(ValueError):
        StepSchedule(kind="nope", eta0=0.1)
    with pytest.raises(ValueError):
        StepSchedule.fixed(-1.0)
    with pytest.raises(ValueError):
        StepSchedule.sbb(0.1, -1e-3)
    with pytest.raises(ValueError):
        next_eta(StepSchedule.fixed(0.1), 0, None, None, None, None)
