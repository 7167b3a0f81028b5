"""The O(|S|) shared state of AsyncQVI and its access primitives."""

import threading
from typing import NamedTuple

import numpy as np

from .config import SELECTORS, TRAJECTORY_RESTART


class LocalSnapshot(NamedTuple):
    v_hat: np.ndarray
    taken_at: int


class SharedTable:
    """Per-state value ``v`` and greedy action ``pi`` plus the global iteration counter.

    ``lock_words`` are spin-lock words used by the compiled kernels; Python workers use
    the per-state ``threading.Lock`` objects instead. A single run uses one kind only.
    """

    def __init__(self, num_states, num_actions=None, with_q=False, record_commits=False):
        self.num_states = num_states
        self.v = np.zeros(num_states)
        self.pi = np.zeros(num_states, dtype=np.int64)
        self.counter = np.zeros(1, dtype=np.int64)
        self.lock_words = np.zeros(num_states, dtype=np.int64)
        self.q = np.zeros((num_states, num_actions)) if with_q else None
        self._locks = [threading.Lock() for _ in range(num_states)]
        self._counter_lock = threading.Lock()
        self.log = [] if record_commits else None

    @property
    def t(self):
        return int(self.counter[0])

    def claim(self, limit):
        """Reserve the next iteration index, or return -1 once ``limit`` is reached."""
        with self._counter_lock:
            t = int(self.counter[0])
            if t >= limit:
                return -1
            self.counter[0] = t + 1
            return t

    def snapshot(self):
        taken_at = int(self.counter[0])
        return LocalSnapshot(self.v.copy(), taken_at)

    def commit(self, state, action, q, t=-1):
        with self._locks[state]:
            if q > self.v[state]:
                self.v[state] = q
                self.pi[state] = action
                if self.log is not None:
                    self.log.append((t, state, action, q))
                return True
            return False

    def relax(self, state, action, target, alpha, t=-1):
        """Q-learning step ``Q[i,a] <- (1-alpha) Q[i,a] + alpha target``; keeps (v, pi) greedy."""
        with self._locks[state]:
            row = self.q[state]
            row[action] = (1.0 - alpha) * row[action] + alpha * target
            best = int(np.argmax(row))
            self.v[state] = row[best]
            self.pi[state] = best
            if self.log is not None:
                self.log.append((t, state, best, row[best]))

    def read_pair(self, state):
        with self._locks[state]:
            return float(self.v[state]), int(self.pi[state])


def snapshot_values(shared):
    return shared.snapshot()


def conditional_commit(shared, state, action, q):
    """Write (v_i, pi_i) <- (q, a) iff q > v_i, re-checked under the state lock."""
    if not np.isfinite(q):
        raise ValueError(f"q must be finite, got {q}")
    return shared.commit(state, action, q)


def cyclic_block(worker_id, num_workers, num_pairs):
    """Half-open range of pair indices swept by ``worker_id``."""
    lo = worker_id * num_pairs // num_workers
    hi = (worker_id + 1) * num_pairs // num_workers
    if hi == lo:  # more workers than pairs: share the full sweep
        return 0, num_pairs
    return lo, hi


def select_coordinate(selector, worker_id, step, num_states, num_actions, rng,
                      num_workers=1, next_state=None):
    """Pick the (state, action) pair a worker updates at its ``step``-th iteration.

    ``trajectory`` continues from ``next_state``, the successor sampled by the
    worker's previous update, and restarts uniformly every 200 steps.
    """
    if selector == "uniform":
        return int(rng.integers(num_states)), int(rng.integers(num_actions))
    if selector == "cyclic":
        lo, hi = cyclic_block(worker_id, num_workers, num_states * num_actions)
        return divmod(lo + step % (hi - lo), num_actions)
    if selector == "trajectory":
        if step % TRAJECTORY_RESTART == 0:
            return int(rng.integers(num_states)), int(rng.integers(num_actions))
        if next_state is None:
            raise ValueError("trajectory selection needs the previously sampled next state")
        return int(next_state), int(rng.integers(num_actions))
    raise ValueError(f"selector must be one of {SELECTORS}, got {selector!r}")
