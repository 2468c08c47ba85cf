"""Resumable SAGD and projected SGD for the lower-level problem.

States carry the completed-iteration counter ``ell``; advancing a state to a
larger cumulative target continues the same recursion, so a run split over
stages is identical to one uninterrupted run over the same gradient stream.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _kernels
from .problem import BudgetCounters, Oracle, SystemSpec

log = logging.getLogger(__name__)

CHUNK = 1 << 16


class NonFiniteGradient(FloatingPointError):
    """A stochastic gradient sample was NaN or infinite."""


@dataclass
class SagdState:
    x: np.ndarray
    x_bar: np.ndarray
    x_under: np.ndarray
    mu: float
    nu: float
    lower: np.ndarray
    upper: np.ndarray
    ell: int = 0

    @classmethod
    def start(cls, sys: SystemSpec, x0: Optional[np.ndarray] = None) -> "SagdState":
        c = sys.constants
        if not c.nu > 0:
            raise ValueError("SAGD requires nu > 0")
        x0 = sys.midpoint() if x0 is None else sys.project(np.asarray(x0, dtype=float))
        return cls(x0.copy(), x0.copy(), x0.copy(), c.mu, c.nu, sys.lower, sys.upper)

    def step_constants(self, ell: int):
        """``(q, 1/gamma, q')`` used by step number ``ell`` (1-based)."""
        q = 2.0 / (ell + 1.0)
        inv_gamma = self.mu * (ell - 1.0) / 2.0 + 2.0 * self.nu / ell
        gamma = 1.0 / inv_gamma
        qp = q / (q + (1.0 - q) * (1.0 + self.mu * gamma))
        return q, inv_gamma, qp

    def extrapolate(self) -> np.ndarray:
        """Point at which the next step samples its gradient."""
        _, _, qp = self.step_constants(self.ell + 1)
        return (1.0 - qp) * self.x + qp * self.x_bar


@dataclass
class SgdState:
    x: np.ndarray
    gamma: float
    lower: np.ndarray
    upper: np.ndarray
    ell: int = 0

    @classmethod
    def start(cls, sys: SystemSpec, gamma: Optional[float] = None,
              x0: Optional[np.ndarray] = None) -> "SgdState":
        if gamma is None:
            gamma = 1.0 / sys.constants.mu
        x0 = sys.midpoint() if x0 is None else sys.project(np.asarray(x0, dtype=float))
        return cls(x0.copy(), float(gamma), sys.lower, sys.upper)


OptimizerState = Union[SagdState, SgdState]


def _check(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradient("nonfinite stochastic gradient sample")
    return g


def sagd_step(s: SagdState, g: np.ndarray) -> SagdState:
    """One SAGD step with ``g`` sampled at ``s.extrapolate()``; updates ``s`` in place."""
    g = _check(g)
    ell = s.ell + 1
    q, inv_gamma, qp = s.step_constants(ell)
    gamma = 1.0 / inv_gamma
    s.x_under = (1.0 - qp) * s.x + qp * s.x_bar
    x_bar = (gamma * s.mu * s.x_under + s.x_bar - gamma * g) / (1.0 + gamma * s.mu)
    s.x_bar = np.clip(x_bar, s.lower, s.upper)
    s.x = (1.0 - q) * s.x + q * s.x_bar
    s.ell = ell
    return s


def sgd_step(s: SgdState, g: np.ndarray) -> SgdState:
    """One projected SGD step with step size ``gamma / ell``; updates ``s`` in place."""
    g = _check(g)
    ell = s.ell + 1
    s.x = np.clip(s.x - (s.gamma / ell) * g, s.lower, s.upper)
    s.ell = ell
    return s


def _run_fast(state: OptimizerState, A: np.ndarray, B: np.ndarray) -> None:
    A = np.ascontiguousarray(A, dtype=float)
    B = np.ascontiguousarray(B, dtype=float)
    if isinstance(state, SagdState):
        done = _kernels.sagd_run(state.x, state.x_bar, state.x_under, state.ell, state.mu,
                                 state.nu, state.lower, state.upper, A, B)
    else:
        done = _kernels.sgd_run(state.x, state.ell, state.gamma, state.lower, state.upper, A, B)
    state.ell += int(done)
    if done < A.shape[0]:
        raise NonFiniteGradient(f"nonfinite stochastic gradient at iteration {state.ell + 1}")


def optimize_to(sys: SystemSpec, state: OptimizerState, target_iters: int, oracle: Oracle,
                rng: np.random.Generator, budget: Optional[BudgetCounters] = None,
                stage: int = 0) -> OptimizerState:
    """Advance ``state`` until ``state.ell == target_iters``.

    Consumes exactly one gradient draw per step from ``rng`` and records
    them in ``budget`` under ``stage``. A target below the current counter
    is a logged no-op.
    """
    steps = int(target_iters) - state.ell
    if steps < 0:
        log.warning("system %d: target %d below current iteration %d; no-op",
                    sys.id, target_iters, state.ell)
        return state
    # private arrays: kernels write in place
    state.x = np.array(state.x, dtype=float)
    if isinstance(state, SagdState):
        state.x_bar = np.array(state.x_bar, dtype=float)
        state.x_under = np.array(state.x_under, dtype=float)
    remaining = steps
    fast = True
    while remaining > 0:
        n = min(remaining, CHUNK)
        coeffs = oracle.gradient_coefficients(sys.id, n, rng) if fast else None
        if coeffs is None:
            fast = False
            for _ in range(n):
                if isinstance(state, SagdState):
                    sagd_step(state, oracle.eval_G(sys.id, state.extrapolate(), rng))
                else:
                    sgd_step(state, oracle.eval_G(sys.id, state.x, rng))
        else:
            _run_fast(state, *coeffs)
        remaining -= n
    if budget is not None:
        budget.add_grad(stage, steps)
    return state
