"""Asynchronous-parallel Q-value iteration for discounted MDPs with a generative model."""

from .evaluation import EvaluationReport, SpeedupRow, evaluate_policy, rollout, speedup_benchmark
from .mdp import (GenerativeModel, MdpValidationError, TabularGenerativeModel, TabularMdp,
                  bellman_apply, greedy_from_q, policy_operator_apply, random_mdp,
                  validate_mdp)
from .reference import (OracleSolution, ValueIteration, epsilon_optimality_gap,
                        policy_value_exact, value_iteration_exact)
from .sailing import SailingConfig, SailingModel, SailingState, sailing_tabularize
from .solvers import (AsyncQLearning, AsyncQVI, ScheduleSpec, SolverConfig, aql_run,
                      asyncqvi_run, asyncqvi_run_exact)
from .theory import (AsynchronismBound, contraction_rate_rho, hoeffding_trial_check,
                     iteration_bound_L, sample_bound_K)

__version__ = "0.1.0"

__all__ = [
    "AsyncQLearning", "AsyncQVI", "AsynchronismBound", "EvaluationReport",
    "GenerativeModel", "MdpValidationError", "OracleSolution", "SailingConfig",
    "SailingModel", "SailingState", "ScheduleSpec", "SolverConfig", "SpeedupRow",
    "TabularGenerativeModel", "TabularMdp", "ValueIteration", "aql_run", "asyncqvi_run",
    "asyncqvi_run_exact", "bellman_apply", "contraction_rate_rho",
    "epsilon_optimality_gap", "evaluate_policy", "greedy_from_q", "hoeffding_trial_check",
    "iteration_bound_L", "policy_operator_apply", "policy_value_exact", "random_mdp",
    "rollout", "sailing_tabularize", "sample_bound_K", "speedup_benchmark",
    "validate_mdp", "value_iteration_exact",
]
