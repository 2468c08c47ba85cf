"""Multi-stage pruning and optimisation for selecting the best system when
each system's performance depends on a continuous decision variable."""
from .bounds import (AsymptoticConstants, asymptotic_constants, iteration_target, n_asym_diff,
                     n_asym_same, n_exact_diff, n_exact_same, solve_lambda, solve_sigma_infinity)
from .drug import DrugParams, DrugProblem, ground_truth
from .optimizers import SagdState, SgdState, optimize_to, sagd_step, sgd_step
from .orchestrator import RunConfig, RunReport, aggregate, run, run_replications
from .problem import (BudgetCounters, Oracle, RegularityConstants, StageState, SystemSpec,
                      ToleranceSchedule, make_schedule, validate_schedule)
from .pruning import PruneResult, prune
from .tables import emit_tables

__version__ = "0.1.0"
