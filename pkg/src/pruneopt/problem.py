"""Problem abstraction shared by the solver modules.

A bilevel selection problem consists of ``K`` systems. System ``k`` owns a
decision variable ``x_k`` living in a box; its lower-level objective
``f(k, x)`` is minimised by stochastic gradient methods and its upper-level
performance ``h(k, x)`` is compared across systems.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class RegularityConstants:
    """Regularity constants of one system (upper bounds where ``x*`` is unknown).

    Attributes
    ----------
    mu : strong-convexity modulus of ``f``.
    nu : smoothness constant of ``f``.
    M : non-smoothness constant of ``f``.
    L : Lipschitz constant of ``h`` on the box.
    D : bound on the box diameter.
    sigma_G : sub-Gaussian parameter of the stochastic gradient.
    cov_G_norm : bound on the spectral norm of ``Cov(G(x*, xi))``.
    hess_norm : bound on the spectral norm of the Hessian of ``f`` at ``x*``.
    grad_h_norm : bound on the norm of the gradient of ``h`` at ``x*``.
    sigma_tilde_sq : optional direct bound on the asymptotic variance of
        ``sqrt(N) (h(x_N) - h(x*))``; replaces the product of norm bounds.
    """

    mu: float
    nu: float = 0.0
    M: float = 0.0
    L: float = 0.0
    D: float = 0.0
    sigma_G: float = 0.0
    cov_G_norm: float = 0.0
    hess_norm: float = 0.0
    grad_h_norm: float = 0.0
    sigma_tilde_sq: Optional[float] = None

    def __post_init__(self):
        for name in ("mu", "nu", "M", "L", "D", "sigma_G", "cov_G_norm", "hess_norm", "grad_h_norm"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {value}")
        if self.sigma_tilde_sq is not None and not self.sigma_tilde_sq >= 0:
            raise ValueError("sigma_tilde_sq must be nonnegative")
        if self.mu <= 0:
            raise ValueError("mu must be positive (strong convexity)")


@dataclass(frozen=True)
class SystemSpec:
    """One system: index, dimension, feasible box and constants."""

    id: int
    lower: np.ndarray
    upper: np.ndarray
    constants: RegularityConstants
    same_objective: bool = False

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1 or lower.size < 1:
            raise ValueError("box bounds must be 1-d arrays of equal length")
        if not np.all(lower < upper):
            raise ValueError("box requires lower < upper in every coordinate")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if self.constants.D ** 2 < self.box_diameter_sq() * (1 - 1e-12):
            raise ValueError("constants.D is smaller than the box diameter")

    @property
    def dim(self) -> int:
        return self.lower.size

    def box_diameter_sq(self) -> float:
        return float(np.sum((self.upper - self.lower) ** 2))

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


class Oracle:
    """Sampling interface of a bilevel problem.

    Subclasses implement ``eval_H``, ``eval_F`` and ``eval_G``. Every draw
    consumes randomness only from the generator passed in, so independent
    generators give i.i.d. samples and equal generator states replay draws.

    Batch hooks (``sample_H``, ``joint_sample_H``, ``gradient_coefficients``)
    have slow generic defaults or are optional; problems with structure
    override them.
    """

    systems: List[SystemSpec]

    def system(self, k: int) -> SystemSpec:
        return self.systems[k - 1]

    @property
    def K(self) -> int:
        return len(self.systems)

    def eval_H(self, k: int, x: np.ndarray, rng: np.random.Generator) -> float:
        raise NotImplementedError

    def eval_F(self, k: int, x: np.ndarray, rng: np.random.Generator) -> float:
        raise NotImplementedError

    def eval_G(self, k: int, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def sample_H(self, k: int, x: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` i.i.d. draws of ``H(k, x, .)``, in stream order."""
        return np.array([self.eval_H(k, x, rng) for _ in range(n)], dtype=float)

    def joint_eval_H(self, xs: Dict[int, np.ndarray], rng: np.random.Generator) -> Dict[int, float]:
        """One draw of ``H`` for every system in ``xs`` from shared randomness."""
        raise NotImplementedError("this oracle does not support common random numbers")

    def joint_sample_H(self, xs: Dict[int, np.ndarray], n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` joint draws; returns an ``(n, len(xs))`` array, columns ordered as ``sorted(xs)``."""
        ids = sorted(xs)
        out = np.empty((n, len(ids)))
        for row in range(n):
            draw = self.joint_eval_H(xs, rng)
            out[row] = [draw[k] for k in ids]
        return out

    def gradient_coefficients(self, k: int, n: int, rng: np.random.Generator):
        """Optional fast path for oracles with ``G(x, xi) = A(xi) * x + B(xi)``.

        Returns ``(A, B)``, each of shape ``(n, d)``, consuming the generator
        exactly as ``n`` successive ``eval_G`` calls would. Oracles without
        this structure return ``None``.
        """
        return None


@dataclass(frozen=True)
class ToleranceSchedule:
    """Stage tolerances and significance levels."""

    eps: tuple
    eps_prime: tuple
    epsilon: float
    alpha: float
    alpha_opt: tuple
    alpha_prune: tuple

    @property
    def T(self) -> int:
        return len(self.eps)


def make_schedule(K: int, eps: float, alpha: float, T: Optional[int] = None) -> ToleranceSchedule:
    """Build the geometric schedule ``eps_t = (2/5) 2^(T-t) eps``, ``eps'_t = (3/5) 2^(T-t) eps``.

    ``T`` defaults to ``ceil(log2 K)``. Both per-stage significance levels
    are ``alpha / (2T)``; the optimisation level is split further across
    systems by the caller.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0, 1)")
    if not (eps > 0 and math.isfinite(eps)):
        raise ValueError("eps must be positive and finite")
    if T is None:
        T = max(1, math.ceil(math.log2(K)))
    if T < 1:
        raise ValueError("T must be at least 1")
    e = tuple(0.4 * 2.0 ** (T - t) * eps for t in range(1, T + 1))
    ep = tuple(0.6 * 2.0 ** (T - t) * eps for t in range(1, T + 1))
    if e[-1] <= 0 or not all(map(math.isfinite, e + ep)):
        raise ValueError("eps is too small to represent the schedule")
    a = alpha / (2 * T)
    return ToleranceSchedule(e, ep, float(eps), float(alpha), (a,) * T, (a,) * T)


def validate_schedule(s: ToleranceSchedule, rtol: float = 1e-12) -> List[str]:
    """Names of every violated schedule invariant (empty list means valid)."""
    violations = []
    eps, eps_p = list(s.eps), list(s.eps_prime)
    if len(eps) != len(eps_p) or not eps:
        return ["length"]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        violations.append("eps decreasing")
    if any(b >= a for a, b in zip(eps_p, eps_p[1:])):
        violations.append("eps_prime decreasing")
    if any(e <= 0 for e in eps + eps_p):
        violations.append("positive")
    if any(ep <= e for e, ep in zip(eps, eps_p)):
        violations.append("eps_prime > eps")
    if abs(eps[-1] + eps_p[-1] - s.epsilon) > rtol * max(1.0, s.epsilon):
        violations.append("terminal sum")
    if sum(s.alpha_opt) + sum(s.alpha_prune) > s.alpha * (1 + rtol):
        violations.append("significance budget")
    return violations


@dataclass
class BudgetCounters:
    """Gradient and function evaluation tallies, per stage."""

    grad_by_stage: Dict[int, int] = field(default_factory=dict)
    func_by_stage: Dict[int, int] = field(default_factory=dict)

    def add_grad(self, stage: int, n: int) -> None:
        if n < 0:
            raise ValueError("budget counters are monotone")
        self.grad_by_stage[stage] = self.grad_by_stage.get(stage, 0) + int(n)

    def add_func(self, stage: int, n: int) -> None:
        if n < 0:
            raise ValueError("budget counters are monotone")
        self.func_by_stage[stage] = self.func_by_stage.get(stage, 0) + int(n)

    @property
    def grad_evals(self) -> int:
        return sum(self.grad_by_stage.values())

    @property
    def func_evals(self) -> int:
        return sum(self.func_by_stage.values())


@dataclass
class StageState:
    """Mutable state of one run: remaining set, optimiser states, budgets."""

    remaining: List[int]
    optimizers: Dict[int, object]
    budget: BudgetCounters = field(default_factory=BudgetCounters)

    def iter_count(self, k: int) -> int:
        return self.optimizers[k].ell

    def x(self, k: int) -> np.ndarray:
        return self.optimizers[k].x


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a ``(seed, key...)`` tuple.

    Keys such as ``(replication, system, purpose)`` index disjoint streams,
    so a stream's content does not depend on how many other streams exist or
    in which order they are consumed.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


# purpose tags for ``stream`` keys
GRADIENT = 0
FUNCTION = 1
FUNCTION_CRN = 2
