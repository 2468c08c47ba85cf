import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pruneopt.problem import (BudgetCounters, RegularityConstants, SystemSpec, make_schedule,
                              stream, validate_schedule)


def test_schedule_single_stage():
    s = make_schedule(20, 0.1, 0.1, T=1)
    assert s.eps == pytest.approx((0.04,))
    assert s.eps_prime == pytest.approx((0.06,))
    assert s.alpha_opt == (0.05,)
    assert s.alpha_prune == (0.05,)
    assert validate_schedule(s) == []


def test_schedule_default_stage_count():
    assert make_schedule(20, 0.1, 0.1).T == 5
    assert make_schedule(2, 0.1, 0.1).T == 1
    assert make_schedule(16, 0.1, 0.1).T == 4


def test_schedule_three_stages_frozen():
    s = make_schedule(20, 0.1, 0.1, T=3)
    assert s.eps == pytest.approx((0.16, 0.08, 0.04))
    assert s.eps_prime == pytest.approx((0.24, 0.12, 0.06))


@pytest.mark.parametrize("kw", [dict(K=1, eps=0.1, alpha=0.1), dict(K=5, eps=0.0, alpha=0.1),
                                dict(K=5, eps=0.1, alpha=1.0), dict(K=5, eps=0.1, alpha=0.0),
                                dict(K=5, eps=float("inf"), alpha=0.1)])
def test_schedule_rejects(kw):
    with pytest.raises(ValueError):
        make_schedule(**kw)


def test_schedule_deterministic():
    assert make_schedule(7, 0.3, 0.05, 4) == make_schedule(7, 0.3, 0.05, 4)


@given(K=st.integers(2, 200), eps=st.floats(1e-6, 1e3), alpha=st.floats(1e-6, 0.999),
       T=st.integers(1, 12))
def test_schedule_invariants(K, eps, alpha, T):
    s = make_schedule(K, eps, alpha, T)
    assert validate_schedule(s) == []
    assert math.isclose(s.eps[-1] + s.eps_prime[-1], eps, rel_tol=1e-12)
    assert sum(s.alpha_opt) + sum(s.alpha_prune) <= alpha * (1 + 1e-12)
    for e, ep in zip(s.eps, s.eps_prime):
        assert 0 < e < ep


def test_validate_reports_each_violation():
    s = make_schedule(4, 0.1, 0.1, 2)
    bad = s.__class__((0.01, 0.02), (0.005, 0.5), 0.3, 0.1, (0.1, 0.1), (0.1, 0.1))
    v = validate_schedule(bad)
    for name in ("eps decreasing", "eps_prime decreasing", "eps_prime > eps", "terminal sum",
                 "significance budget"):
        assert name in v
    assert validate_schedule(s.__class__((), (), 0.1, 0.1, (), ())) == ["length"]


def test_constants_validation():
    with pytest.raises(ValueError):
        RegularityConstants(mu=0.0)
    with pytest.raises(ValueError):
        RegularityConstants(mu=1.0, L=-1.0)
    with pytest.raises(ValueError):
        RegularityConstants(mu=1.0, sigma_G=float("nan"))
    with pytest.raises(ValueError):
        RegularityConstants(mu=1.0, sigma_tilde_sq=-1.0)


def test_system_spec_box():
    c = RegularityConstants(mu=1.0, D=3.0)
    s = SystemSpec(1, [0.0, 0.0], [2.0, 2.0], c)
    assert s.dim == 2
    assert s.box_diameter_sq() == 8.0
    np.testing.assert_array_equal(s.midpoint(), [1.0, 1.0])
    np.testing.assert_array_equal(s.project(np.array([-1.0, 5.0])), [0.0, 2.0])
    assert s.contains([0.0, 2.0]) and not s.contains([2.1, 0.0])
    with pytest.raises(ValueError):
        SystemSpec(1, [0.0], [0.0], c)
    with pytest.raises(ValueError):
        SystemSpec(1, [0.0, 0.0], [2.0, 2.0], RegularityConstants(mu=1.0, D=2.0))


def test_budget_counters():
    b = BudgetCounters()
    b.add_grad(1, 5)
    b.add_grad(2, 7)
    b.add_func(1, 3)
    assert b.grad_evals == 12 and b.func_evals == 3
    with pytest.raises(ValueError):
        b.add_grad(1, -1)


def test_streams_are_keyed():
    a = stream(1, 0, 3, 0).random(4)
    np.testing.assert_array_equal(a, stream(1, 0, 3, 0).random(4))
    assert not np.array_equal(a, stream(1, 0, 4, 0).random(4))
    assert not np.array_equal(a, stream(2, 0, 3, 0).random(4))


def test_batched_uniforms_match_sequential():
    # the batch hooks rely on this property of numpy's generator
    rows = stream(5, 1).random((50, 3))
    rng = stream(5, 1)
    seq = np.array([rng.random(3) for _ in range(50)])
    np.testing.assert_array_equal(rows, seq)
