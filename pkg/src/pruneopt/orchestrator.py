"""Multi-stage pruning-optimisation driver and macro-replication harness."""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from . import bounds
from .optimizers import SagdState, SgdState, optimize_to
from .problem import (FUNCTION, FUNCTION_CRN, GRADIENT, BudgetCounters, Oracle, StageState,
                      make_schedule, stream, validate_schedule)
from .pruning import R0_DEFAULT, prune

METHODS = ("exact", "asymptotic")
SIGNIFICANCE_SPLITS = ("per_system", "per_stage")
OPT_TOLERANCES = ("stage", "combined")


@dataclass
class RunConfig:
    """Everything that determines a run, apart from the oracle itself.

    ``significance_split`` selects the optimisation significance given to
    each system at each stage: ``per_system`` is ``alpha / (2 T K)``,
    ``per_stage`` is ``alpha / (2 T)``. ``opt_tolerance`` selects the
    tolerance fed to the sample-size rule: ``stage`` is ``eps_t`` and
    ``combined`` is ``eps_t + eps'_t``.
    """

    method: str = "exact"
    objective: str = "different"
    K: int = 20
    epsilon: float = 0.1
    alpha: float = 0.1
    T: int = 1
    r0: int = R0_DEFAULT
    use_crn: bool = False
    seed: int = 0
    replications: int = 1
    significance_split: str = "per_system"
    opt_tolerance: str = "stage"
    gamma_scale: float = 1.0
    problem: str = "drug"
    problem_params: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.objective not in ("same", "different"):
            raise ValueError("objective must be 'same' or 'different'")
        if self.significance_split not in SIGNIFICANCE_SPLITS:
            raise ValueError(f"significance_split must be one of {SIGNIFICANCE_SPLITS}")
        if self.opt_tolerance not in OPT_TOLERANCES:
            raise ValueError(f"opt_tolerance must be one of {OPT_TOLERANCES}")
        if self.K < 1 or self.T < 1 or self.replications < 1 or self.r0 < 2:
            raise ValueError("need K >= 1, T >= 1, replications >= 1, r0 >= 2")
        if not self.gamma_scale > 0.5:
            raise ValueError("gamma_scale must exceed 1/2 (step scale gamma = gamma_scale / mu)")

    def schedule(self):
        return make_schedule(max(self.K, 2), self.epsilon, self.alpha, self.T)

    def system_significance(self) -> float:
        a = self.alpha / (2 * self.T)
        return a / self.K if self.significance_split == "per_system" else a

    def rule(self, same_objective: bool) -> str:
        """Name of the sample-size rule this configuration uses."""
        return {("exact", False): "sagd-diff", ("exact", True): "sagd-same",
                ("asymptotic", False): "sgd-normal", ("asymptotic", True): "sgd-quadratic"}[
            (self.method, same_objective)]


@dataclass
class StageRecord:
    stage: int
    eps: float
    eps_prime: float
    remaining_before: List[int]
    remaining_after: List[int]
    targets: Dict[int, int]
    grad_evals: int
    func_evals: int
    prune_rounds: int = 0
    events: List = field(default_factory=list)


@dataclass
class RunReport:
    selected: int
    remaining: List[int]
    stages: List[StageRecord]
    grad_evals: int
    func_evals: int
    early_stop: bool
    elapsed: float
    seed: int
    replication: int
    eps_optimal: Optional[bool] = None
    best_survived: Optional[bool] = None
    config: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        d = asdict(self)
        for st in d["stages"]:
            st["targets"] = {str(k): v for k, v in st["targets"].items()}
        return d


def _stage_tolerance(cfg: RunConfig, sched, t: int) -> float:
    e = sched.eps[t - 1]
    return e + sched.eps_prime[t - 1] if cfg.opt_tolerance == "combined" else e


def _optimize_stage(cfg, oracle, state: StageState, grad_rngs, t: int, eps_opt: float) -> Dict[int, int]:
    alpha_sys = cfg.system_significance()
    targets = {}
    for k in state.remaining:
        sys = oracle.system(k)
        gamma = cfg.gamma_scale / sys.constants.mu
        n_k = bounds.iteration_target(cfg.method, sys.same_objective, sys.constants, sys.dim,
                                      eps_opt, alpha_sys, gamma, sys.constants.sigma_tilde_sq)
        targets[k] = n_k
        optimize_to(sys, state.optimizers[k], n_k, oracle, grad_rngs[k], state.budget, t)
        if not np.all(np.isfinite(state.optimizers[k].x)):
            raise FloatingPointError(f"nonfinite iterate for system {k}")
    return targets


def run(cfg: RunConfig, oracle: Oracle, replication: int = 0) -> RunReport:
    """One macro-replication of the multi-stage procedure."""
    start = time.perf_counter()
    sched = cfg.schedule()
    problems = validate_schedule(sched)
    if problems:
        raise ValueError(f"invalid tolerance schedule: {problems}")
    if oracle.K != cfg.K:
        raise ValueError(f"oracle has {oracle.K} systems, configuration expects {cfg.K}")

    optimizers = {}
    for sys in oracle.systems:
        if cfg.method == "exact":
            optimizers[sys.id] = SagdState.start(sys)
        else:
            optimizers[sys.id] = SgdState.start(sys, cfg.gamma_scale / sys.constants.mu)
    state = StageState(list(range(1, cfg.K + 1)), optimizers, BudgetCounters())
    grad_rngs = {k: stream(cfg.seed, replication, k, GRADIENT) for k in state.remaining}
    records: List[StageRecord] = []
    early_stop = False
    T = sched.T

    if cfg.K == 1:
        targets = _optimize_stage(cfg, oracle, state, grad_rngs, T, _stage_tolerance(cfg, sched, T))
        records.append(StageRecord(T, sched.eps[-1], sched.eps_prime[-1], [1], [1], targets,
                                   state.budget.grad_by_stage.get(T, 0), 0))
    else:
        for t in range(1, T + 1):
            before = list(state.remaining)
            targets = _optimize_stage(cfg, oracle, state, grad_rngs, t, _stage_tolerance(cfg, sched, t))
            rounds, events = 0, []
            if len(state.remaining) >= 2:
                if cfg.use_crn:
                    rng = stream(cfg.seed, replication, 0, FUNCTION_CRN, t)
                else:
                    rng = stream(cfg.seed, replication, 0, FUNCTION, t)
                xs = {k: state.x(k) for k in state.remaining}
                res = prune(state.remaining, xs, sched.eps[t - 1], sched.eps_prime[t - 1],
                            sched.alpha_prune[t - 1], oracle, rng, cfg.use_crn, cfg.r0)
                state.remaining = res.remaining
                state.budget.add_func(t, res.func_evals)
                rounds, events = res.r_final, res.events
            records.append(StageRecord(t, sched.eps[t - 1], sched.eps_prime[t - 1], before,
                                       list(state.remaining), targets,
                                       state.budget.grad_by_stage.get(t, 0),
                                       state.budget.func_by_stage.get(t, 0), rounds, events))
            if len(state.remaining) == 1:
                early_stop = t < T
                break

    report = RunReport(
        selected=min(state.remaining), remaining=list(state.remaining), stages=records,
        grad_evals=state.budget.grad_evals, func_evals=state.budget.func_evals,
        early_stop=early_stop, elapsed=time.perf_counter() - start, seed=cfg.seed,
        replication=replication, config=asdict(cfg),
    )
    truth = getattr(oracle, "eps_optimal_set", None)
    if truth is not None:
        report.eps_optimal = report.selected in truth(cfg.epsilon)
        best = int(np.argmin(oracle.optimal_values())) + 1
        report.best_survived = best in state.remaining
    return report


@dataclass
class Aggregate:
    replications: int
    probability: Optional[float]
    probability_hw: Optional[float]
    gradient: float
    gradient_hw: Optional[float]
    function: float
    function_hw: Optional[float]
    best_survival: Optional[float] = None


def _mean_hw(values) -> tuple:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), None
    return float(v.mean()), float(1.96 * v.std(ddof=1) / math.sqrt(v.size))


def aggregate(reports: List[RunReport]) -> Aggregate:
    """Means and normal-approximation 95% half-widths over replications."""
    grad, grad_hw = _mean_hw([r.grad_evals for r in reports])
    func, func_hw = _mean_hw([r.func_evals for r in reports])
    if all(r.eps_optimal is not None for r in reports):
        prob, prob_hw = _mean_hw([float(r.eps_optimal) for r in reports])
        surv = float(np.mean([r.best_survived for r in reports]))
    else:
        prob = prob_hw = surv = None
    return Aggregate(len(reports), prob, prob_hw, grad, grad_hw, func, func_hw, surv)


def _one(args):
    cfg, factory, rep = args
    return run(cfg, factory(), rep)


def run_replications(cfg: RunConfig, oracle_factory: Callable[[], Oracle], jobs: int = 1,
                     progress: Optional[Callable[[int, RunReport], None]] = None):
    """Run ``cfg.replications`` independent replications; returns ``(reports, aggregate)``.

    Replication ``r`` draws every stream from ``(cfg.seed, r, ...)``, so the
    result does not depend on ``jobs``.
    """
    tasks = [(cfg, oracle_factory, rep) for rep in range(cfg.replications)]
    reports: List[RunReport] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for rep, rpt in enumerate(pool.map(_one, tasks)):
                reports.append(rpt)
                if progress:
                    progress(rep, rpt)
    else:
        for task in tasks:
            rpt = _one(task)
            reports.append(rpt)
            if progress:
                progress(task[2], rpt)
    return reports, aggregate(reports)
