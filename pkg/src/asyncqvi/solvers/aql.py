"""Asynchronous Q-learning baselines (constant, diminishing and adaptive stepsizes).

Unlike AsyncQVI these keep a full |S| x |A| Q table.
"""

import numpy as np
from sklearn.base import BaseEstimator

from .._validation import check_is_fitted
from ..mdp import TabularGenerativeModel, TabularMdp
from ._engine import AQL, AsyncRun
from .asyncqvi import _drive
from .config import ScheduleSpec, SolverConfig

STEPSIZES = {
    "constant": None,
    "diminishing": ScheduleSpec.diminishing_stepsize,
    "adaptive": ScheduleSpec.adaptive_stepsize,
}


def aql_run(gm, cfg, stepsize, *, backend="auto", record_commits=False,
            checkpoint_every=None, callback=None):
    """One-sample updates ``Q[i,a] <- (1-α_t) Q[i,a] + α_t (r + γ max_b Q[j,b])``.

    Returns ``(policy, values, stats)``; the final table is in ``stats.extra["q"]``.
    """
    if stepsize.kind != "stepsize":
        raise ValueError("stepsize must be a stepsize schedule")
    L, _ = cfg.resolve(gm.num_states, gm.num_actions)
    run = AsyncRun(AQL, gm, num_threads=cfg.num_threads, limit=L, schedule=stepsize,
                   gamma=cfg.gamma, selector=cfg.selector, seed=cfg.seed,
                   backend=backend, record_commits=record_commits)
    _drive(run, checkpoint_every, callback)
    stats = run.stats()
    stats.extra["q"] = run.shared.q.copy()
    return run.shared.pi.copy(), run.shared.v.copy(), stats


class AsyncQLearning(BaseEstimator):
    """Asynchronous-parallel Q-learning from single generative-model samples.

    ``stepsize`` is ``"constant"`` (uses ``alpha``), ``"diminishing"`` (1/t^0.51),
    ``"adaptive"`` (max(t^-0.1, 0.1)) or a stepsize :class:`ScheduleSpec`.
    """

    def __init__(self, gamma=None, n_iterations=100_000, stepsize="constant", alpha=0.5,
                 n_threads=1, selector="uniform", backend="auto", record_commits=False,
                 random_state=0):
        self.gamma = gamma
        self.n_iterations = n_iterations
        self.stepsize = stepsize
        self.alpha = alpha
        self.n_threads = n_threads
        self.selector = selector
        self.backend = backend
        self.record_commits = record_commits
        self.random_state = random_state

    def _stepsize(self):
        if isinstance(self.stepsize, ScheduleSpec):
            return self.stepsize
        if self.stepsize not in STEPSIZES:
            raise ValueError(f"stepsize must be one of {tuple(STEPSIZES)} or a ScheduleSpec")
        if self.stepsize == "constant":
            return ScheduleSpec.constant_stepsize(self.alpha)
        return STEPSIZES[self.stepsize]()

    def fit(self, model, checkpoint_every=None, callback=None):
        if isinstance(model, TabularMdp):
            model = TabularGenerativeModel(model)
        gamma = self.gamma if self.gamma is not None else getattr(model, "gamma", None)
        if gamma is None:
            raise ValueError("gamma is required when the model does not define one")
        cfg = SolverConfig(gamma=gamma, num_threads=self.n_threads, L=self.n_iterations,
                           selector=self.selector, seed=self.random_state)
        self.policy_, self.values_, self.stats_ = aql_run(
            model, cfg, self._stepsize(), backend=self.backend,
            record_commits=self.record_commits, checkpoint_every=checkpoint_every,
            callback=callback)
        self.q_ = self.stats_.extra["q"]
        return self

    def predict(self, states):
        check_is_fitted(self, "policy_")
        return self.policy_[np.asarray(states, dtype=np.int64)]
