"""Asynchronous-parallel Q-value iteration over a generative model."""

import numpy as np
from sklearn.base import BaseEstimator

from .._validation import check_is_fitted, check_positive_int
from ..mdp import TabularGenerativeModel, TabularMdp, sampled_backup, validate_mdp
from ._engine import QVI, QVI_EXACT, AsyncRun
from .config import SolverConfig


def compute_q_sample(gm, state, action, v_hat, K, epsilon, gamma, correction=True,
                     rng=None):
    """K-sample backup ``mean r + γ mean v_hat[j]``, minus (1-γ)ε/4 when ``correction``."""
    check_positive_int(K, "K")
    if rng is None:
        rng = np.random.default_rng()
    values = v_hat.v_hat if hasattr(v_hat, "v_hat") else np.asarray(v_hat)
    mean_r, mean_v, _ = sampled_backup(gm, state, action, values, K, rng)
    q = mean_r + gamma * mean_v
    return q - (1.0 - gamma) * epsilon / 4.0 if correction else q


def _drive(run, checkpoint_every, callback):
    if not checkpoint_every:
        run.advance()
        return
    check_positive_int(checkpoint_every, "checkpoint_every")
    while run.iterations_done < run.limit:
        run.advance(run.iterations_done + checkpoint_every)
        if callback is not None:
            callback(run.iterations_done, run.shared.pi.copy(), run.shared.v.copy(),
                     run.stats())


def asyncqvi_run(gm, cfg, *, backend="auto", record_commits=False,
                 checkpoint_every=None, callback=None):
    """Run AsyncQVI against ``gm``; returns ``(policy, values, stats)``.

    With ``checkpoint_every`` the workers pause every that many iterations and
    ``callback(iterations, policy, values, stats)`` sees a consistent table; paused
    time is not counted in ``stats.wall_time``.
    """
    L, schedule = cfg.resolve(gm.num_states, gm.num_actions)
    run = AsyncRun(QVI, gm, num_threads=cfg.num_threads, limit=L, schedule=schedule,
                   gamma=cfg.gamma, selector=cfg.selector, copy_period=cfg.copy_period,
                   correction=(1.0 - cfg.gamma) * cfg.epsilon / 4.0, seed=cfg.seed,
                   backend=backend, record_commits=record_commits)
    _drive(run, checkpoint_every, callback)
    return run.shared.pi.copy(), run.shared.v.copy(), run.stats()


def asyncqvi_run_exact(mdp, cfg, *, on_iteration=None, record_commits=False,
                       checkpoint_every=None, callback=None):
    """AsyncQVI scheduling with exact expectations and no correction term.

    Returns ``(policy, values, Q, stats)``; ``Q`` holds the latest tentative value of
    every pair. ``on_iteration(t, i, a, q, accepted, shared)`` runs after each commit.
    """
    validate_mdp(mdp)
    if abs(mdp.gamma - cfg.gamma) > 1e-15:
        raise ValueError(f"config gamma {cfg.gamma} differs from the MDP's {mdp.gamma}")
    L, schedule = cfg.resolve(mdp.num_states, mdp.num_actions)
    run = AsyncRun(QVI_EXACT, mdp, num_threads=cfg.num_threads, limit=L,
                   schedule=schedule, gamma=cfg.gamma, selector=cfg.selector,
                   copy_period=cfg.copy_period, seed=cfg.seed, backend="python",
                   record_commits=record_commits, on_iteration=on_iteration)
    _drive(run, checkpoint_every, callback)
    return run.shared.pi.copy(), run.shared.v.copy(), run.shared.q.copy(), run.stats()


class AsyncQVI(BaseEstimator):
    """Asynchronous-parallel Q-value iteration with O(|S|) shared memory.

    Parameters
    ----------
    epsilon, delta : float
        Target accuracy and failure probability; they set the correction term and,
        when ``n_iterations``/``n_samples`` are 0, the theoretical budgets.
    gamma : float or None
        Discount factor; ``None`` takes ``model.gamma``.
    n_threads : int
    n_iterations : int
        Iteration budget L (0 = theorem value).
    n_samples : int
        Samples per update K (0 = theorem value); ignored when ``schedule`` is set.
    selector : {"uniform", "cyclic", "trajectory"}
    schedule : ScheduleSpec or None
        Sample-count schedule, e.g. ``ScheduleSpec.adaptive_samples()``.
    copy_period : int
        Refresh the worker's local copy of v every this many iterations.
    exact : bool
        Replace sampling by exact expectations (requires a ``TabularMdp``).
    backend : {"auto", "python", "compiled"}
    record_commits : bool
    random_state : int
    """

    def __init__(self, epsilon=0.1, delta=0.1, gamma=None, n_threads=1, n_iterations=0,
                 n_samples=0, selector="uniform", schedule=None, copy_period=1,
                 exact=False, backend="auto", record_commits=False, random_state=0):
        self.epsilon = epsilon
        self.delta = delta
        self.gamma = gamma
        self.n_threads = n_threads
        self.n_iterations = n_iterations
        self.n_samples = n_samples
        self.selector = selector
        self.schedule = schedule
        self.copy_period = copy_period
        self.exact = exact
        self.backend = backend
        self.record_commits = record_commits
        self.random_state = random_state

    def _config(self, model):
        gamma = self.gamma if self.gamma is not None else getattr(model, "gamma", None)
        if gamma is None:
            raise ValueError("gamma is required when the model does not define one")
        return SolverConfig(epsilon=self.epsilon, delta=self.delta, gamma=gamma,
                            num_threads=self.n_threads, L=self.n_iterations,
                            K=self.n_samples, selector=self.selector,
                            schedule=self.schedule, copy_period=self.copy_period,
                            seed=self.random_state)

    def fit(self, model, checkpoint_every=None, callback=None):
        """Solve ``model`` (a generative model, or a TabularMdp)."""
        cfg = self._config(model)
        if self.exact:
            if not isinstance(model, TabularMdp):
                raise TypeError("exact=True needs a TabularMdp")
            self.policy_, self.values_, self.q_, self.stats_ = asyncqvi_run_exact(
                model, cfg, record_commits=self.record_commits,
                checkpoint_every=checkpoint_every, callback=callback)
        else:
            if isinstance(model, TabularMdp):
                model = TabularGenerativeModel(model)
            self.policy_, self.values_, self.stats_ = asyncqvi_run(
                model, cfg, backend=self.backend, record_commits=self.record_commits,
                checkpoint_every=checkpoint_every, callback=callback)
        self.n_iterations_, self.schedule_ = cfg.resolve(model.num_states, model.num_actions)
        return self

    def predict(self, states):
        """Greedy action for each state index."""
        check_is_fitted(self, "policy_")
        return self.policy_[np.asarray(states, dtype=np.int64)]
