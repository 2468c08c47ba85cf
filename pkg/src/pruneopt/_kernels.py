"""Compiled inner loops for oracles whose stochastic gradient is affine in x.

Each kernel consumes pre-drawn coefficient rows ``G_l = A[l] * x + B[l]``
(elementwise) and returns the number of completed steps; a return value
smaller than ``len(A)`` flags a nonfinite gradient at that row.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def sagd_run(x, x_bar, x_under, ell, mu, nu, lower, upper, A, B):
    n = A.shape[0]
    d = x.shape[0]
    for j in range(n):
        l = ell + j + 1
        q = 2.0 / (l + 1.0)
        gamma = 1.0 / (mu * (l - 1.0) / 2.0 + 2.0 * nu / l)
        qp = q / (q + (1.0 - q) * (1.0 + mu * gamma))
        for i in range(d):
            x_under[i] = (1.0 - qp) * x[i] + qp * x_bar[i]
        for i in range(d):
            g = A[j, i] * x_under[i] + B[j, i]
            if not np.isfinite(g):
                return j
            v = (gamma * mu * x_under[i] + x_bar[i] - gamma * g) / (1.0 + gamma * mu)
            if v < lower[i]:
                v = lower[i]
            elif v > upper[i]:
                v = upper[i]
            x_bar[i] = v
            x[i] = (1.0 - q) * x[i] + q * v
    return n


@njit(cache=True)
def sgd_run(x, ell, gamma, lower, upper, A, B):
    n = A.shape[0]
    d = x.shape[0]
    for j in range(n):
        step = gamma / (ell + j + 1.0)
        for i in range(d):
            g = A[j, i] * x[i] + B[j, i]
            if not np.isfinite(g):
                return j
        for i in range(d):
            v = x[i] - step * (A[j, i] * x[i] + B[j, i])
            if v < lower[i]:
                v = lower[i]
            elif v > upper[i]:
                v = upper[i]
            x[i] = v
    return n
