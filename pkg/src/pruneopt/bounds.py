"""Sample-size rules for the optimisation step.

Non-asymptotic counts come from the high-probability bound of stochastic
accelerated gradient descent; asymptotic counts come from the limit laws of
plain SGD with step ``gamma / l`` (normal when ``h != f``, a Gaussian
quadratic form when ``h == f``).

All functions are pure.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .problem import RegularityConstants

LAMBDA_TOL = 1e-9


def _tail(lam: float) -> float:
    return math.exp(-lam) + math.exp(-lam * lam / 3.0)


def solve_lambda(a: float) -> float:
    """Smallest ``lam >= 0`` with ``exp(-lam) + exp(-lam^2/3) <= a``.

    The tail function equals 2 at zero and decreases strictly, so the answer
    is found by bracketing and bisection to ``LAMBDA_TOL``. For ``a >= 2``
    the bound is vacuous; zero is returned with a warning.
    """
    if not a > 0:
        raise ValueError("significance budget must be positive")
    if a >= 2:
        warnings.warn("significance budget >= 2 makes the tail bound vacuous; lambda = 0", RuntimeWarning)
        return 0.0
    hi = 1.0
    while _tail(hi) > a:
        hi *= 2.0
    lo = 0.0
    while hi - lo > LAMBDA_TOL:
        mid = 0.5 * (lo + hi)
        if _tail(mid) <= a:
            hi = mid
        else:
            lo = mid
    return hi


def _smallest_n(satisfied: Callable[[int], bool]) -> int:
    """Smallest positive integer ``n`` with ``satisfied(n)``, for a monotone predicate."""
    if satisfied(1):
        return 1
    hi = 2
    while not satisfied(hi):
        hi *= 2
        if hi > 1 << 62:
            raise OverflowError("iteration count does not fit in 64 bits")
    lo = hi // 2  # not satisfied
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if satisfied(mid):
            hi = mid
        else:
            lo = mid
    return hi


def sagd_error_bound(c: RegularityConstants, lam: float, n: int) -> float:
    """Optimality-gap bound of SAGD after ``n`` steps at confidence parameter ``lam``."""
    sg = c.sigma_G
    return (2.0 * lam * sg * c.D / math.sqrt(3.0 * n)
            + (4.0 * c.M ** 2 + 4.0 * (1.0 + lam) * sg ** 2) / (c.mu * (n + 1))
            + 4.0 * c.nu * c.D ** 2 / (n * (n + 1.0)))


def _n_exact(c: RegularityConstants, lam: float, rhs: float) -> int:
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if not rhs > 0:
        raise ValueError("target accuracy must be positive")
    return _smallest_n(lambda n: sagd_error_bound(c, lam, n) <= rhs)


def n_exact_diff(c: RegularityConstants, lam: float, eps_t: float) -> int:
    """SAGD iterations so that ``|h(x_N) - h(x*)| <= eps_t`` when ``h != f``.

    The optimality gap of ``f`` is driven below ``mu eps_t^2 / (2 L^2)``,
    which by strong convexity and the Lipschitz property of ``h`` gives the
    tolerance on ``h``.
    """
    if not c.L > 0:
        raise ValueError("Lipschitz constant L must be positive")
    if not eps_t > 0:
        raise ValueError("eps_t must be positive")
    return _n_exact(c, lam, c.mu * eps_t ** 2 / (2.0 * c.L ** 2))


def n_exact_same(c: RegularityConstants, lam: float, eps_t: float) -> int:
    """SAGD iterations so that ``f(x_N) - f(x*) <= eps_t`` (case ``h == f``)."""
    if not eps_t > 0:
        raise ValueError("eps_t must be positive")
    return _n_exact(c, lam, eps_t)


@dataclass(frozen=True)
class AsymptoticConstants:
    gamma: float
    sigma_tilde_sq: float
    b: float
    d: int


def _gamma_factor(gamma: float, mu: float) -> float:
    if not gamma > 1.0 / (2.0 * mu):
        raise ValueError(f"step scale gamma={gamma} must exceed 1/(2 mu)={1.0 / (2.0 * mu)}")
    return gamma ** 2 / (2.0 * gamma * mu - 1.0)


def solve_sigma_infinity(hess, cov, gamma: float) -> np.ndarray:
    """Stationary covariance of the normalised SGD iterate.

    Solves ``(gamma H - I/2) S + S (gamma H - I/2) = gamma^2 C`` through the
    Kronecker-sum form of the Lyapunov operator.
    """
    hess = np.atleast_2d(np.asarray(hess, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    d = hess.shape[0]
    if hess.shape != (d, d) or cov.shape != (d, d):
        raise ValueError("hess and cov must be square matrices of equal size")
    A = gamma * hess - 0.5 * np.eye(d)
    eye = np.eye(d)
    ksum = np.kron(A, eye) + np.kron(eye, A)
    rhs = gamma ** 2 * cov.reshape(-1, order="F")
    # the operator is singular exactly when gamma = 1 / (2 lambda_min(H))
    if np.linalg.cond(ksum) > 1e14:
        raise np.linalg.LinAlgError("Kronecker-sum operator is singular (gamma at 1/(2 lambda_min))")
    sigma = np.linalg.solve(ksum, rhs).reshape(d, d, order="F")
    return 0.5 * (sigma + sigma.T)


def sigma_tilde_bound(c: RegularityConstants, gamma: float) -> float:
    """Upper bound on the asymptotic variance of ``sqrt(N) (h(x_N) - h(x*))``."""
    return _gamma_factor(gamma, c.mu) * c.grad_h_norm ** 2 * c.hess_norm * c.cov_G_norm


def quadratic_form_scale(c: RegularityConstants, gamma: float) -> float:
    """Constant ``b`` of the quadratic-form tail bound (case ``h == f``)."""
    return _gamma_factor(gamma, c.mu) * c.cov_G_norm * c.hess_norm


def asymptotic_constants(c: RegularityConstants, d: int, gamma: Optional[float] = None,
                         sigma_tilde_sq: Optional[float] = None) -> AsymptoticConstants:
    """Bundle the step scale (default ``1/mu``) with the derived tail constants.

    ``sigma_tilde_sq`` overrides the product bound when the problem knows a
    tighter value.
    """
    if gamma is None:
        gamma = 1.0 / c.mu
    s2 = sigma_tilde_bound(c, gamma) if sigma_tilde_sq is None else float(sigma_tilde_sq)
    return AsymptoticConstants(gamma, s2, quadratic_form_scale(c, gamma), int(d))


def normal_tail_bound(sigma_tilde: float, eps_t: float, n: int) -> float:
    """Mills-ratio bound on ``P(|N(0, sigma^2)| >= sqrt(n) eps_t)``."""
    if sigma_tilde == 0:
        return 0.0
    log_val = (0.5 * math.log(2.0) + math.log(sigma_tilde) - 0.5 * math.log(math.pi * n)
               - math.log(eps_t) - n * eps_t ** 2 / (2.0 * sigma_tilde ** 2))
    return math.exp(log_val)


def n_asym_diff(sigma_tilde: float, eps_t: float, alpha_t: float) -> int:
    """Smallest ``N`` whose normal tail bound at ``eps_t`` is at most ``alpha_t``."""
    if sigma_tilde < 0:
        raise ValueError("sigma_tilde must be nonnegative")
    if not eps_t > 0 or not (0 < alpha_t < 1):
        raise ValueError("need eps_t > 0 and 0 < alpha_t < 1")
    return _smallest_n(lambda n: normal_tail_bound(sigma_tilde, eps_t, n) <= alpha_t)


def n_asym_same(b: float, d: int, eps_t: float, alpha_t: float) -> int:
    if not b > 0 or d < 1:
        raise ValueError("need b > 0 and d >= 1")
    if not eps_t > 0 or not (0 < alpha_t < 1):
        raise ValueError("need eps_t > 0 and 0 < alpha_t < 1")
    factor = max(4.0 * math.log(1.0 / alpha_t) + 1.5 * d, 2.0 * d)
    return max(1, math.ceil(b / eps_t * factor))


def iteration_target(method: str, same_objective: bool, c: RegularityConstants, d: int,
                     eps_t: float, alpha_sys: float, gamma: Optional[float] = None,
                     sigma_tilde_sq: Optional[float] = None) -> int:
    """Cumulative iteration count ``N_k^t`` for one system at one stage.

    ``alpha_sys`` is the significance allotted to this system at this stage.
    """
    if method == "exact":
        lam = solve_lambda(alpha_sys)
        return n_exact_same(c, lam, eps_t) if same_objective else n_exact_diff(c, lam, eps_t)
    if method == "asymptotic":
        ac = asymptotic_constants(c, d, gamma, sigma_tilde_sq)
        if same_objective:
            return n_asym_same(ac.b, d, eps_t, alpha_sys)
        return n_asym_diff(math.sqrt(ac.sigma_tilde_sq), eps_t, alpha_sys)
    raise ValueError(f"unknown method {method!r}")
