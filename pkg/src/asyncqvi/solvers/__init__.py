from .aql import AsyncQLearning, aql_run
from .asyncqvi import AsyncQVI, asyncqvi_run, asyncqvi_run_exact, compute_q_sample
from .config import (AsyncRunStats, CommitLog, ScheduleSpec, SolverConfig,
                     iterations_for_sample_budget, schedule_value)
from .shared import (LocalSnapshot, SharedTable, conditional_commit, select_coordinate,
                     snapshot_values)

__all__ = [
    "AsyncQLearning", "AsyncQVI", "AsyncRunStats", "CommitLog", "LocalSnapshot",
    "ScheduleSpec", "SharedTable", "SolverConfig", "aql_run", "asyncqvi_run",
    "asyncqvi_run_exact", "compute_q_sample", "conditional_commit",
    "iterations_for_sample_budget", "schedule_value", "select_coordinate",
    "snapshot_values",
]
