"""Fully sequential pairwise pruning.

Every pair ``i < k`` of remaining systems is tested against the two
thresholds ``+q`` and ``-q`` with a triangular continuation region that
shrinks to zero, so each pair is decided after finitely many rounds. A
system shown to be worse than another by more than the stage tolerance is
evicted; the survivors form the next remaining set.

Rounds are evaluated in vectorised blocks. Only the first round in a block
at which some pair test fires is processed with the sequential pair loop;
earlier rounds change nothing and are skipped over. The outcome equals the
one-round-at-a-time procedure on the same sample streams.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .problem import Oracle

R0_DEFAULT = 20
_MIN_BLOCK = 32
_MAX_BLOCK = 1 << 16
_MAX_CELLS = 1 << 22


def eta_of(alpha_prune: float, m: int, r0: int) -> float:
    """Continuation-region constant for ``m`` systems and first-stage size ``r0``."""
    if m < 2 or r0 < 2:
        raise ValueError("need m >= 2 and r0 >= 2")
    if not (0 < alpha_prune < 1):
        raise ValueError("alpha_prune must lie in (0, 1)")
    base = 2.0 * alpha_prune / (m * (m - 1))
    return 0.5 * (base ** (-2.0 / (r0 - 1)) - 1.0)


@dataclass(frozen=True)
class CiRadiusParams:
    r0: int
    eta: float
    tau: float
    s_sq: float

    def __post_init__(self):
        if self.eta < 0 or not self.tau > 0 or self.s_sq < 0:
            raise ValueError("need eta >= 0, tau > 0 and s_sq >= 0")


def ci_radius(r, p: CiRadiusParams):
    """Half-width of the continuation region for the sum of ``r`` paired differences."""
    value = (p.r0 - 1) * p.eta * p.s_sq / p.tau - p.tau * np.asarray(r, dtype=float) / 2.0
    out = np.maximum(0.0, value)
    return float(out) if np.ndim(out) == 0 else out


def radius_zero_round(p: CiRadiusParams) -> int:
    """First ``r`` at which the radius vanishes."""
    return max(p.r0, math.ceil(2.0 * (p.r0 - 1) * p.eta * p.s_sq / p.tau ** 2))


class _Samples:
    """Buffered H draws for the systems of one session.

    Independent mode keeps one stream per system and advances a system's
    stream only for rounds in which it is sampled. CRN mode draws joint rows
    from one stream; every round consumes one row.
    """

    def __init__(self, oracle: Oracle, x: Mapping[int, np.ndarray], ids: List[int],
                 rng: np.random.Generator, use_crn: bool):
        self.oracle = oracle
        self.x = x
        self.ids = list(ids)
        self.col = {k: j for j, k in enumerate(self.ids)}
        self.use_crn = use_crn
        if use_crn:
            self.rng = rng
            self.buf = np.empty((0, len(self.ids)))
            self.off = 0
        else:
            seeds = rng.integers(0, 2 ** 63, size=len(self.ids))
            self.rngs = {k: np.random.Generator(np.random.PCG64(int(s))) for k, s in zip(self.ids, seeds)}
            self.bufs = {k: np.empty(0) for k in self.ids}
            self.offs = {k: 0 for k in self.ids}

    def _fill(self, n: int, k: Optional[int] = None) -> None:
        if self.use_crn:
            avail = self.buf.shape[0] - self.off
            if avail < n:
                extra = self.oracle.joint_sample_H({j: self.x[j] for j in self.ids}, max(n - avail, 256), self.rng)
                self.buf = np.vstack([self.buf[self.off:], extra])
                self.off = 0
        else:
            avail = self.bufs[k].size - self.offs[k]
            if avail < n:
                extra = self.oracle.sample_H(k, self.x[k], max(n - avail, 256), self.rngs[k])
                self.bufs[k] = np.concatenate([self.bufs[k][self.offs[k]:], np.asarray(extra, dtype=float)])
                self.offs[k] = 0

    def peek(self, ids: List[int], n: int) -> np.ndarray:
        """Next ``n`` rounds of draws for ``ids`` as an ``(n, len(ids))`` array."""
        if self.use_crn:
            self._fill(n)
            cols = [self.col[k] for k in ids]
            return self.buf[self.off:self.off + n][:, cols]
        out = np.empty((n, len(ids)))
        for j, k in enumerate(ids):
            self._fill(n, k)
            out[:, j] = self.bufs[k][self.offs[k]:self.offs[k] + n]
        return out

    def consume(self, ids: List[int], n: int) -> None:
        if self.use_crn:
            self.off += n
        else:
            for k in ids:
                self.offs[k] += n


@dataclass
class PruneResult:
    remaining: List[int]
    func_evals: int
    r_final: int
    eta: float
    q: float
    tau: float
    s_sq: Dict[Tuple[int, int], float]
    events: List[Tuple[int, str, int]] = field(default_factory=list)
    rounds_sampled: List[Tuple[int, int]] = field(default_factory=list)


class PruneSession:
    """State of one pruning session; call :meth:`run` once."""

    def __init__(self, remaining, x, eps_t: float, eps_prime_t: float, alpha_prune: float,
                 oracle: Oracle, rng: np.random.Generator, use_crn: bool = False, r0: int = R0_DEFAULT):
        if not eps_prime_t > eps_t > 0:
            raise ValueError("need eps_prime_t > eps_t > 0")
        if r0 < 2:
            raise ValueError("r0 must be at least 2")
        self.remaining = sorted(remaining)
        self.on = list(self.remaining)
        self.q = 0.5 * (eps_prime_t + eps_t)
        self.tau = 0.5 * (eps_prime_t - eps_t)
        self.r0 = r0
        m = len(self.remaining)
        self.eta = eta_of(alpha_prune, m, r0) if m >= 2 else 0.0
        self.samples = _Samples(oracle, x, self.remaining, rng, use_crn)
        self.pairs = list(itertools.combinations(self.remaining, 2))
        self.stop1 = {p: False for p in self.pairs}
        self.stop2 = {p: False for p in self.pairs}
        self.s_sq: Dict[Tuple[int, int], float] = {}
        self.sums: Dict[int, float] = {}
        self.r = 0
        self.func_evals = 0
        self.events: List[Tuple[int, str, int]] = []
        self.rounds_sampled: List[Tuple[int, int]] = []

    # radius constant per pair: Z(r) = max(0, zc - tau r / 2)
    def _zc(self, pair) -> float:
        return (self.r0 - 1) * self.eta * self.s_sq[pair] / self.tau

    def _evict(self, k: int) -> None:
        self.remaining.remove(k)
        self.on.remove(k)
        self.events.append((self.r, "evict", k))
        # pairs of an evicted system are never revisited; close them
        for p in self.pairs:
            if k in p:
                self.stop1[p] = self.stop2[p] = True

    def _initial_stage(self) -> None:
        ids = self.remaining
        block = self.samples.peek(ids, self.r0)
        self.samples.consume(ids, self.r0)
        self.func_evals += self.r0 * len(ids)
        means = block.mean(axis=0)
        col = {k: j for j, k in enumerate(ids)}
        for i, k in self.pairs:
            diff = block[:, col[i]] - block[:, col[k]]
            self.s_sq[(i, k)] = float(np.sum((diff - (means[col[i]] - means[col[k]])) ** 2) / (self.r0 - 1))
        self.sums = {k: float(block[:, col[k]].sum()) for k in ids}
        self.r = self.r0

    def _process_round(self) -> None:
        """Sequential pair loop and retirement at the current ``r``."""
        r = self.r
        for p in self.pairs:
            i, k = p
            if i not in self.on or k not in self.on:
                continue
            if self.stop1[p] and self.stop2[p]:
                continue
            diff = self.sums[i] / r - self.sums[k] / r
            w = max(0.0, self._zc(p) - self.tau * r / 2.0) / r
            if not self.stop1[p]:
                if diff - w >= self.q:
                    self.stop1[p] = True
                    self._evict(i)
                    continue
                elif diff + w <= self.q:
                    self.stop1[p] = True
            if not self.stop2[p]:
                if diff + w <= -self.q:
                    self.stop2[p] = True
                    self._evict(k)
                elif diff - w >= -self.q:
                    self.stop2[p] = True
        for k in list(self.on):
            done = all(self.stop1[p] and self.stop2[p] for p in self.pairs
                       if k in p and p[0] in self.on and p[1] in self.on)
            if done:
                self.on.remove(k)
                self.events.append((r, "retire", k))

    def _advance(self, n: int, block: Optional[np.ndarray] = None) -> None:
        """Draw ``n`` further rounds for every system in ON."""
        if n <= 0:
            return
        if block is None:
            block = self.samples.peek(self.on, n)
        # same running-sum arithmetic as _first_event, so decisions replay exactly
        totals = np.cumsum(block[:n], axis=0)[-1]
        for j, k in enumerate(self.on):
            self.sums[k] += float(totals[j])
        self.samples.consume(self.on, n)
        self.func_evals += n * len(self.on)
        self.rounds_sampled.append((n, len(self.on)))
        self.r += n

    def _first_event(self, B: int):
        """Offset (0..B) of the first round whose pair tests change state, and the peeked block."""
        on = self.on
        col = {k: j for j, k in enumerate(on)}
        active = [p for p in self.pairs if p[0] in col and p[1] in col
                  and not (self.stop1[p] and self.stop2[p])]
        if not active:
            return 0, None
        block = self.samples.peek(on, B)
        sums0 = np.array([self.sums[k] for k in on])
        cum = np.vstack([sums0, sums0 + np.cumsum(block, axis=0)])
        r = self.r + np.arange(B + 1, dtype=float)
        ii = np.array([col[p[0]] for p in active])
        kk = np.array([col[p[1]] for p in active])
        diff = cum[:, ii] / r[:, None] - cum[:, kk] / r[:, None]
        zc = np.array([self._zc(p) for p in active])
        w = np.maximum(0.0, zc[None, :] - self.tau * r[:, None] / 2.0) / r[:, None]
        s1 = np.array([self.stop1[p] for p in active])
        s2 = np.array([self.stop2[p] for p in active])
        fire1 = ~s1 & ((diff - w >= self.q) | (diff + w <= self.q))
        fire2 = ~s2 & ((diff + w <= -self.q) | (diff - w >= -self.q))
        rows = np.flatnonzero(np.any(fire1 | fire2, axis=1))
        return (int(rows[0]) if rows.size else None), block

    def run(self) -> PruneResult:
        if len(self.remaining) >= 2:
            self._initial_stage()
            B = _MIN_BLOCK
            while len(self.on) >= 2:
                width = max(1, len(self.on) * (len(self.on) - 1) // 2)
                B = min(B, _MAX_BLOCK, max(1, _MAX_CELLS // width))
                j, block = self._first_event(B)
                if j is None:
                    self._advance(B, block)
                    B *= 2
                    continue
                self._advance(j, block)
                self._process_round()
                if len(self.on) >= 2:
                    self._advance(1)
                B = _MIN_BLOCK
        return PruneResult(list(self.remaining), self.func_evals, self.r, self.eta, self.q, self.tau,
                           dict(self.s_sq), list(self.events), list(self.rounds_sampled))


def prune(remaining, x, eps_t: float, eps_prime_t: float, alpha_prune: float, oracle: Oracle,
          rng: np.random.Generator, use_crn: bool = False, r0: int = R0_DEFAULT) -> PruneResult:
    """Run one pruning session over ``remaining`` at the stage's tolerances.

    With fewer than two systems the input set is returned unchanged.
    """
    return PruneSession(remaining, x, eps_t, eps_prime_t, alpha_prune, oracle, rng, use_crn, r0).run()
