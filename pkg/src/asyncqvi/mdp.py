"""Tabular discounted MDPs, their Bellman operators, and a generative-model view.

Transitions are stored in compressed sparse row form: row ``k = i * num_actions + a``
holds the support ``next_states[indptr[k]:indptr[k + 1]]`` of p_i^a together with
the matching probabilities and per-transition rewards.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Protocol, runtime_checkable

import numpy as np
import scipy.sparse as sp
from numba import njit

from ._validation import (check_gamma, check_policy, check_positive_int, check_q_table,
                          check_random_state, check_values)

ROW_SUM_TOL = 1e-12


class MdpValidationError(ValueError):
    """An MDP violates a structural assumption; ``state``/``action`` name the row if known."""

    def __init__(self, message, state=None, action=None):
        super().__init__(message)
        self.state = state
        self.action = action


@dataclass(frozen=True, eq=False)
class TabularMdp:
    num_states: int
    num_actions: int
    indptr: np.ndarray
    next_states: np.ndarray
    probs: np.ndarray
    rewards: np.ndarray
    gamma: float

    def __post_init__(self):
        for name, dtype in (("indptr", np.int64), ("next_states", np.int64),
                            ("probs", np.float64), ("rewards", np.float64)):
            arr = np.ascontiguousarray(getattr(self, name), dtype=dtype)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "num_states", int(self.num_states))
        object.__setattr__(self, "num_actions", int(self.num_actions))
        object.__setattr__(self, "gamma", float(self.gamma))

    @classmethod
    def from_dense(cls, P, R, gamma, tol=0.0):
        """Build from a dense ``(S, A, S)`` kernel and ``(S, A, S)`` or ``(S, A)`` rewards."""
        P = np.asarray(P, dtype=np.float64)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"P must have shape (S, A, S), got {P.shape}")
        S, A, _ = P.shape
        R = np.asarray(R, dtype=np.float64)
        if R.shape == (S, A):
            R = np.broadcast_to(R[:, :, None], P.shape)
        elif R.shape != P.shape:
            raise ValueError(f"R must have shape {(S, A)} or {P.shape}, got {R.shape}")
        flat = P.reshape(S * A, S)
        mask = flat > tol
        counts = mask.sum(axis=1)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        rows, cols = np.nonzero(mask)
        return cls(S, A, indptr, cols, flat[rows, cols],
                   R.reshape(S * A, S)[rows, cols], gamma)

    @classmethod
    def from_transitions(cls, num_states, num_actions, gamma, transitions):
        """Build from an iterable of ``(i, a, j, p, r)`` tuples (any order)."""
        data = np.array(list(transitions), dtype=np.float64).reshape(-1, 5)
        i, a, j = (data[:, c].astype(np.int64) for c in range(3))
        rows = i * num_actions + a
        order = np.lexsort((j, rows))
        rows = rows[order]
        counts = np.bincount(rows, minlength=num_states * num_actions)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return cls(num_states, num_actions, indptr, j[order], data[order, 3],
                   data[order, 4], gamma)

    @property
    def shape(self):
        return self.num_states, self.num_actions

    def row(self, state, action):
        """Return ``(next_states, probs, rewards)`` for the pair (state, action)."""
        k = state * self.num_actions + action
        lo, hi = self.indptr[k], self.indptr[k + 1]
        return self.next_states[lo:hi], self.probs[lo:hi], self.rewards[lo:hi]

    @cached_property
    def expected_rewards(self):
        """r̄ as an ``(S, A)`` array."""
        rows = np.repeat(np.arange(self.num_states * self.num_actions),
                         np.diff(self.indptr))
        rbar = np.bincount(rows, weights=self.probs * self.rewards,
                           minlength=self.num_states * self.num_actions)
        return rbar.reshape(self.num_states, self.num_actions)

    @cached_property
    def transition_matrix(self):
        """Sparse ``(S*A, S)`` matrix whose row ``i*A + a`` is p_i^a."""
        return sp.csr_matrix((self.probs, self.next_states, self.indptr),
                             shape=(self.num_states * self.num_actions, self.num_states))

    def policy_matrix(self, policy):
        """Return (P_pi as sparse (S, S), r̄_pi) for a deterministic policy."""
        policy = check_policy(policy, self.num_states, self.num_actions)
        rows = np.arange(self.num_states) * self.num_actions + policy
        return self.transition_matrix[rows], self.expected_rewards.ravel()[rows]


def validate_mdp(mdp):
    """Raise :class:`MdpValidationError` unless ``mdp`` is a well-formed DMDP."""
    if not 0.0 < mdp.gamma < 1.0:
        raise MdpValidationError(f"gamma must lie in (0, 1), got {mdp.gamma}")
    S, A = mdp.num_states, mdp.num_actions
    if S < 1 or A < 1:
        raise MdpValidationError(f"need at least one state and one action, got {S}x{A}")
    if mdp.indptr.shape != (S * A + 1,) or mdp.indptr[0] != 0 or np.any(np.diff(mdp.indptr) < 0):
        raise MdpValidationError("malformed row pointer array")
    nnz = mdp.indptr[-1]
    if not (mdp.next_states.shape == mdp.probs.shape == mdp.rewards.shape == (nnz,)):
        raise MdpValidationError("transition arrays disagree in length")
    rows = np.repeat(np.arange(S * A), np.diff(mdp.indptr))
    bad = (mdp.next_states < 0) | (mdp.next_states >= S)
    if bad.any():
        k = int(rows[np.argmax(bad)])
        raise MdpValidationError(f"next state out of range in row (i={k // A}, a={k % A})",
                                 k // A, k % A)
    bad = ~np.isfinite(mdp.probs) | (mdp.probs < 0)
    if bad.any():
        k = int(rows[np.argmax(bad)])
        raise MdpValidationError(f"negative or non-finite probability at (i={k // A}, a={k % A})",
                                 k // A, k % A)
    sums = np.bincount(rows, weights=mdp.probs, minlength=S * A)
    off = np.abs(sums - 1.0) > ROW_SUM_TOL
    if off.any():
        k = int(np.argmax(off))
        raise MdpValidationError(
            f"probabilities of (i={k // A}, a={k % A}) sum to {float(sums[k])!r}, not 1",
            k // A, k % A)
    bad = ~np.isfinite(mdp.rewards) | (mdp.rewards < 0) | (mdp.rewards > 1)
    if bad.any():
        k = int(rows[np.argmax(bad)])
        raise MdpValidationError(
            f"reward {mdp.rewards[np.argmax(bad)]!r} outside [0, 1] at (i={k // A}, a={k % A})",
            k // A, k % A)


def bellman_apply(q, mdp):
    """Apply the Q-value operator: r̄ + γ Σ_j p_ij^a max_a' q[j, a']."""
    q = check_q_table(q, mdp.num_states, mdp.num_actions)
    future = mdp.transition_matrix @ q.max(axis=1)
    return mdp.expected_rewards + mdp.gamma * future.reshape(mdp.shape)


def policy_operator_apply(v, policy, mdp):
    v = check_values(v, mdp.num_states)
    P_pi, r_pi = mdp.policy_matrix(policy)
    return r_pi + mdp.gamma * (P_pi @ v)


def greedy_from_q(q):
    """Row-wise max and argmax of a Q table; ties go to the lowest action index."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or not np.all(np.isfinite(q)):
        raise ValueError("q must be a finite 2-d array")
    policy = np.argmax(q, axis=1).astype(np.int64)
    return q[np.arange(q.shape[0]), policy], policy


def random_mdp(num_states, num_actions, gamma, density=1.0, random_state=None):
    """Random MDP with Dirichlet rows over a random support and uniform rewards in [0, 1].

    ``density`` is the fraction of states reachable from each pair (at least one).
    """
    check_positive_int(num_states, "num_states")
    check_positive_int(num_actions, "num_actions")
    check_gamma(gamma)
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    rng = check_random_state(random_state)
    width = max(1, int(round(density * num_states)))
    transitions = []
    for i in range(num_states):
        for a in range(num_actions):
            support = np.sort(rng.choice(num_states, size=width, replace=False))
            p = rng.dirichlet(np.ones(width))
            r = rng.random(width)
            transitions.extend((i, a, j, pj, rj) for j, pj, rj in zip(support, p, r))
    mdp = TabularMdp.from_transitions(num_states, num_actions, gamma, transitions)
    # Dirichlet draws can be off by a few ulps; renormalize exactly.
    rows = np.repeat(np.arange(num_states * num_actions), np.diff(mdp.indptr))
    sums = np.bincount(rows, weights=mdp.probs)
    return TabularMdp(num_states, num_actions, mdp.indptr, mdp.next_states,
                      mdp.probs / sums[rows], mdp.rewards, gamma)


@runtime_checkable
class GenerativeModel(Protocol):
    """Sampling oracle: ``sample(i, a, rng)`` returns an independent ``(j, r)`` draw.

    Models may additionally provide

    * ``sample_mean(i, a, K, values, rng) -> (mean_reward, mean_value, j)``, an
      aggregate of K draws (``j`` is one of the drawn next states);
    * ``compiled`` returning a :class:`CompiledSampler` for the nogil worker kernels;
    * ``is_target(state)`` / ``target_states`` for flag counting during evaluation.
    """

    num_states: int
    num_actions: int

    def sample(self, state, action, rng): ...


class CompiledSampler(NamedTuple):
    """Numba-compiled sampling routines.

    ``draw(params, i, a) -> (j, r)`` and
    ``draw_mean(params, i, a, K, values) -> (mean_r, mean_v, j)``; both use numba's
    per-thread ``np.random`` state.
    """
    params: tuple
    draw: object
    draw_mean: object


def sampled_backup(gm, state, action, values, K, rng):
    """Average K generative-model draws at (state, action).

    Returns ``(mean_reward, mean_next_value, j)`` where ``j`` is one drawn next state.
    Uses the model's own ``sample_mean`` aggregate when it has one.
    """
    if hasattr(gm, "sample_mean"):
        return gm.sample_mean(state, action, K, values, rng)
    tot_r = tot_v = 0.0
    for _ in range(K):
        j, r = gm.sample(state, action, rng)
        tot_r += r
        tot_v += values[j]
    return tot_r / K, tot_v / K, j


# direct draws below this K, binomial splitting (exact in law) above it
_MULTINOMIAL_MIN_K = 64


class TabularGenerativeModel:
    """Generative model backed by an explicit :class:`TabularMdp`."""

    def __init__(self, mdp, target_states=()):
        self.mdp = mdp
        self.num_states = mdp.num_states
        self.num_actions = mdp.num_actions
        self.gamma = mdp.gamma
        self.target_states = np.asarray(sorted(set(int(s) for s in target_states)),
                                        dtype=np.int64)
        cum = np.empty_like(mdp.probs)
        for k in range(len(mdp.indptr) - 1):
            lo, hi = mdp.indptr[k], mdp.indptr[k + 1]
            cum[lo:hi] = np.cumsum(mdp.probs[lo:hi])
            if hi > lo:
                cum[hi - 1] = np.inf  # guard against cumulative sums just below 1
        self._cum = cum

    def _draw_index(self, k, rng):
        lo, hi = self.mdp.indptr[k], self.mdp.indptr[k + 1]
        return lo + int(np.searchsorted(self._cum[lo:hi], rng.random(), side="right"))

    def sample(self, state, action, rng):
        idx = self._draw_index(state * self.num_actions + action, rng)
        return int(self.mdp.next_states[idx]), float(self.mdp.rewards[idx])

    def sample_mean(self, state, action, K, values, rng):
        k = state * self.num_actions + action
        if K < _MULTINOMIAL_MIN_K:
            tot_r = tot_v = 0.0
            for _ in range(K):
                idx = self._draw_index(k, rng)
                j = int(self.mdp.next_states[idx])
                tot_r += self.mdp.rewards[idx]
                tot_v += values[j]
            return tot_r / K, tot_v / K, j
        js, p, r = self.mdp.row(state, action)
        counts = rng.multinomial(K, p / p.sum())
        j = int(js[np.searchsorted(np.cumsum(counts), rng.integers(K), side="right")])
        return float(counts @ r) / K, float(counts @ values[js]) / K, j

    def is_target(self, state):
        return bool(np.isin(state, self.target_states))

    @property
    def compiled(self):
        m = self.mdp
        params = (m.indptr, m.next_states, self._cum, m.probs, m.rewards,
                  np.int64(m.num_actions))
        return CompiledSampler(params, tabular_draw, tabular_draw_mean)


@njit(nogil=True, cache=True)
def _tabular_index(params, k):
    indptr, _, cum = params[0], params[1], params[2]
    lo, hi = indptr[k], indptr[k + 1]
    return lo + np.searchsorted(cum[lo:hi], np.random.random(), side="right")


@njit(nogil=True, cache=True)
def tabular_draw(params, i, a):
    idx = _tabular_index(params, i * params[5] + a)
    return params[1][idx], params[4][idx]


@njit(nogil=True, cache=True)
def fast_binomial(n, p):
    """Exact Binomial(n, p) draw in O(log n) expected time.

    The a-th smallest of n uniforms is Beta(a, n+1-a); comparing it with p tells
    how many uniforms fall below p on one side, and the other side is again
    binomial on a rescaled interval. Small cases go to numba's inversion sampler,
    whose cost grows like n*p.
    """
    total = 0
    while n > 0 and min(p, 1.0 - p) * n > 32.0:
        a = n // 2 + 1
        b = n + 1 - a
        x = np.random.beta(a, b)
        if p < x:
            n = a - 1
            p = p / x
        else:
            total += a
            n = b - 1
            p = (p - x) / (1.0 - x)
        p = min(max(p, 0.0), 1.0)
    if n > 0:
        total += np.random.binomial(n, p)
    return total


@njit(nogil=True, cache=True)
def tabular_draw_mean(params, i, a, K, values):
    indptr, next_states, probs, rewards = params[0], params[1], params[3], params[4]
    k = i * params[5] + a
    tot_r = 0.0
    tot_v = 0.0
    j = -1
    if K < _MULTINOMIAL_MIN_K:
        for _ in range(K):
            idx = _tabular_index(params, k)
            j = next_states[idx]
            tot_r += rewards[idx]
            tot_v += values[j]
        return tot_r / K, tot_v / K, j
    # sequential binomial splitting draws the multinomial count vector exactly
    lo, hi = indptr[k], indptr[k + 1]
    remaining = K
    mass = 1.0
    pick = np.random.randint(0, K)
    seen = 0
    for idx in range(lo, hi):
        if remaining == 0:
            break
        if idx == hi - 1 or mass <= probs[idx]:
            c = remaining
        else:
            c = fast_binomial(remaining, min(1.0, probs[idx] / mass))
        mass -= probs[idx]
        remaining -= c
        tot_r += c * rewards[idx]
        tot_v += c * values[next_states[idx]]
        if j < 0 and pick < seen + c:
            j = next_states[idx]
        seen += c
    return tot_r / K, tot_v / K, j
