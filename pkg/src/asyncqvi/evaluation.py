"""Rollout evaluation of policies and the thread-scaling benchmark."""

import os
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import check_policy, check_positive_int, check_random_state
from .solvers.asyncqvi import asyncqvi_run

DEFAULT_MAX_THREADS = 64


@dataclass
class EvaluationReport:
    episodes: int
    horizon: int
    gamma_eval: float
    mean_return: float
    flags: int
    returns: list = field(default_factory=list)

    @property
    def std_error(self):
        if self.episodes < 2:
            return 0.0
        return float(np.std(self.returns, ddof=1) / np.sqrt(self.episodes))


@dataclass
class SpeedupRow:
    threads: int
    iterations_per_second: float
    wall_time: float
    samples_per_second: float
    iterations: int = 0
    seed: int = 0


def _is_target(gm, state):
    is_target = getattr(gm, "is_target", None)
    return bool(is_target(state)) if is_target is not None else False


def rollout(gm, policy, start, horizon, gamma_eval, rng):
    """Discounted return of ``horizon`` steps of ``policy`` from ``start``.

    The flag is set when any visited state, the start and the last one included,
    is a target. Rollouts run the full horizon even after reaching a target.
    """
    check_positive_int(horizon, "horizon")
    state = int(start)
    flag = _is_target(gm, state)
    total, disc = 0.0, 1.0
    for _ in range(horizon):
        state, r = gm.sample(state, int(policy[state]), rng)
        total += disc * r
        disc *= gamma_eval
        flag = flag or _is_target(gm, state)
    return total, flag


def start_states(gm):
    """States eligible as evaluation starts: everything except targets."""
    targets = np.asarray(getattr(gm, "target_states", ()), dtype=np.int64)
    states = np.arange(gm.num_states, dtype=np.int64)
    if len(targets):
        states = np.setdiff1d(states, targets)
    return states if len(states) else np.arange(gm.num_states, dtype=np.int64)


def evaluate_policy(gm, policy, episodes=100, horizon=200, gamma_eval=0.99,
                    random_state=0):
    """Average discounted return and flag count over uniformly random starts."""
    check_positive_int(episodes, "episodes")
    check_positive_int(horizon, "horizon")
    if not 0 <= gamma_eval < 1:
        raise ValueError(f"gamma_eval must lie in [0, 1), got {gamma_eval}")
    policy = check_policy(policy, gm.num_states, gm.num_actions)
    rng = check_random_state(random_state)
    starts = start_states(gm)
    returns, flags = [], 0
    for _ in range(episodes):
        start = starts[rng.integers(len(starts))]
        ret, flag = rollout(gm, policy, start, horizon, gamma_eval, rng)
        returns.append(ret)
        flags += int(flag)
    return EvaluationReport(episodes, horizon, gamma_eval, float(np.mean(returns)), flags,
                            returns)


def speedup_benchmark(gm, cfg, thread_counts, fixed_L, max_threads=None,
                      backend="auto", warmup=True):
    """Run AsyncQVI with the same budget ``fixed_L`` for each thread count.

    Rows come back in ascending thread order; each row uses a fresh seed derived
    from ``cfg.seed``. Thread counts above ``max_threads`` raise ValueError.
    With ``warmup`` an untimed run of ``fixed_L // 4`` iterations goes first, so
    the baseline row does not pay for cold caches.
    """
    check_positive_int(fixed_L, "fixed_L")
    counts = sorted(set(int(t) for t in thread_counts))
    if not counts:
        raise ValueError("thread_counts is empty")
    guard = max_threads if max_threads is not None else max(DEFAULT_MAX_THREADS,
                                                            os.cpu_count() or 1)
    for t in counts:
        check_positive_int(t, "thread count")
        if t > guard:
            raise ValueError(f"{t} threads exceed the hardware guard of {guard}")
    seeds = np.random.SeedSequence(cfg.seed).generate_state(len(counts))
    if warmup:
        asyncqvi_run(gm, replace(cfg, num_threads=counts[0], L=max(1, fixed_L // 4)),
                     backend=backend)
    rows = []
    for t, seed in zip(counts, seeds):
        run_cfg = replace(cfg, num_threads=t, L=fixed_L, seed=int(seed))
        _, _, stats = asyncqvi_run(gm, run_cfg, backend=backend)
        if stats.iterations_done != fixed_L:
            raise RuntimeError(f"run with {t} threads finished {stats.iterations_done} "
                               f"of {fixed_L} iterations")
        wall = max(stats.wall_time, 1e-12)
        rows.append(SpeedupRow(t, fixed_L / wall, stats.wall_time,
                               stats.samples_drawn / wall, fixed_L, int(seed)))
    return rows


def speedups(rows):
    """baseline_time / time(T) for each row, the first row being the baseline."""
    base = rows[0].wall_time
    return {row.threads: base / row.wall_time for row in rows}
