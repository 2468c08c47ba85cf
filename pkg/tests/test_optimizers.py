import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pruneopt.drug import DrugProblem
from pruneopt.optimizers import (NonFiniteGradient, SagdState, SgdState, optimize_to, sagd_step,
                                 sgd_step)
from pruneopt.problem import BudgetCounters, Oracle, RegularityConstants, SystemSpec, stream


def quad_system(mu=2.0, lo=0.0, hi=2.0):
    return SystemSpec(1, [lo], [hi], RegularityConstants(mu=mu, nu=mu, D=hi - lo))


class Deterministic(Oracle):
    """Noise-free gradient of ``f(x) = x^2`` with no fast path."""

    def __init__(self):
        self.systems = [quad_system()]

    def eval_G(self, k, x, rng):
        rng.random()  # consume one draw per step like a real oracle
        return 2.0 * np.asarray(x, dtype=float)


class SlowDrug(DrugProblem):
    """Drug oracle forced onto the generic per-step path."""

    def gradient_coefficients(self, k, n, rng):
        return None


def test_sagd_step_constants_first_step():
    s = SagdState.start(quad_system())
    q, inv_gamma, qp = s.step_constants(1)
    assert q == 1.0 and inv_gamma == 2 * s.nu and qp == 1.0


def test_sagd_zero_gradient_is_stationary():
    s = SagdState.start(quad_system(), x0=[0.7])
    for _ in range(10):
        sagd_step(s, np.zeros(1))
    np.testing.assert_allclose([s.x, s.x_bar, s.x_under], [[0.7]] * 3, rtol=1e-15, atol=0)


def test_sagd_deterministic_decay():
    sys = quad_system()
    s = SagdState.start(sys, x0=[2.0])
    vals = []
    for _ in range(200):
        sagd_step(s, 2.0 * s.extrapolate())
        vals.append(float(s.x[0] ** 2))
    assert vals[-1] < 1e-3
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("N", [10, 100, 1000])
def test_sagd_noise_free_rate(N):
    sys = quad_system()
    s = SagdState.start(sys, x0=[2.0])
    for _ in range(N):
        sagd_step(s, 2.0 * s.extrapolate())
    nu, D = sys.constants.nu, sys.constants.D
    assert s.x[0] ** 2 <= 4 * nu * D ** 2 / (N * (N + 1))


def test_sgd_steps():
    sys = quad_system()
    s = SgdState(np.array([1.0]), 0.5, sys.lower, sys.upper)
    assert sgd_step(s, np.array([1.0])).x[0] == 0.5
    s = SgdState(np.array([0.1]), 1.0, sys.lower, sys.upper)
    assert sgd_step(s, np.array([1.0])).x[0] == 0.0


def test_sgd_deterministic_rate():
    sys = quad_system()
    s = SgdState.start(sys, x0=[2.0])
    assert s.gamma == 0.5
    for _ in range(1000):
        sgd_step(s, 2.0 * s.x)
    assert s.x[0] ** 2 < 1e-2


def test_nonfinite_gradient_rejected():
    s = SgdState.start(quad_system())
    with pytest.raises(NonFiniteGradient):
        sgd_step(s, np.array([np.nan]))
    with pytest.raises(NonFiniteGradient):
        sagd_step(SagdState.start(quad_system()), np.array([np.inf]))


def test_sagd_requires_smoothness():
    sys = SystemSpec(1, [0.0], [1.0], RegularityConstants(mu=1.0, nu=0.0, D=1.0))
    with pytest.raises(ValueError):
        SagdState.start(sys)


def test_optimize_to_counts_and_noop(caplog):
    o = Deterministic()
    sys = o.system(1)
    s = SgdState.start(sys)
    b = BudgetCounters()
    optimize_to(sys, s, 50, o, stream(0, 1), b, stage=1)
    assert s.ell == 50 and b.grad_by_stage == {1: 50}
    x = s.x.copy()
    optimize_to(sys, s, 50, o, stream(0, 1), b, stage=2)
    assert s.ell == 50 and b.grad_evals == 50
    with caplog.at_level(logging.WARNING):
        optimize_to(sys, s, 10, o, stream(0, 1), b)
    assert "below current iteration" in caplog.text
    np.testing.assert_array_equal(s.x, x)


@pytest.mark.parametrize("state_cls", [SagdState, SgdState])
@pytest.mark.parametrize("objective", ["same", "different"])
def test_fast_path_matches_generic(state_cls, objective):
    fast, slow = DrugProblem(objective=objective), SlowDrug(objective=objective)
    sys = fast.system(4)
    a, b = state_cls.start(sys), state_cls.start(sys)
    optimize_to(sys, a, 3000, fast, stream(9, 0, 4, 0))
    optimize_to(sys, b, 3000, slow, stream(9, 0, 4, 0))
    np.testing.assert_allclose(a.x, b.x, rtol=0, atol=1e-12)
    if state_cls is SagdState:
        np.testing.assert_allclose(a.x_bar, b.x_bar, rtol=0, atol=1e-12)


@pytest.mark.parametrize("state_cls", [SagdState, SgdState])
def test_resumability(state_cls):
    o = DrugProblem()
    sys = o.system(2)
    one, split = state_cls.start(sys), state_cls.start(sys)
    optimize_to(sys, one, 250, o, stream(1, 0, 2, 0))
    rng = stream(1, 0, 2, 0)
    optimize_to(sys, split, 100, o, rng)
    optimize_to(sys, split, 250, o, rng)
    np.testing.assert_array_equal(one.x, split.x)


def test_resumability_across_chunks(monkeypatch):
    import pruneopt.optimizers as opt
    monkeypatch.setattr(opt, "CHUNK", 7)
    o = DrugProblem()
    sys = o.system(2)
    a = SagdState.start(sys)
    optimize_to(sys, a, 100, o, stream(1, 0, 2, 0))
    monkeypatch.setattr(opt, "CHUNK", 1 << 16)
    b = SagdState.start(sys)
    optimize_to(sys, b, 100, o, stream(1, 0, 2, 0))
    np.testing.assert_array_equal(a.x, b.x)


class NanOracle(DrugProblem):
    def gradient_coefficients(self, k, n, rng):
        A, B = super().gradient_coefficients(k, n, rng)
        B[n // 2] = np.nan
        return A, B


def test_fast_path_nonfinite_aborts():
    o = NanOracle()
    s = SgdState.start(o.system(1))
    with pytest.raises(NonFiniteGradient):
        optimize_to(o.system(1), s, 10, o, stream(0))
    assert s.ell == 5


@given(st.integers(0, 2 ** 32), st.integers(1, 400))
def test_iterates_stay_in_box(seed, n):
    o = DrugProblem()
    sys = o.system(1 + seed % 20)
    for cls in (SagdState, SgdState):
        s = cls.start(sys)
        optimize_to(sys, s, n, o, stream(seed))
        assert sys.contains(s.x)
        if cls is SagdState:
            assert sys.contains(s.x_bar) and sys.contains(s.x_under)
