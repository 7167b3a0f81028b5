"""Deterministic ground truth: optimal Q*, v*, pi* and exact policy values."""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from sklearn.base import BaseEstimator

from ._validation import check_is_fitted, check_policy
from .mdp import bellman_apply, greedy_from_q, policy_operator_apply, validate_mdp

DENSE_SOLVE_MAX_STATES = 2000
DIRECT_SOLVE_MAX_STATES = 20000
FALLBACK_TOL = 1e-9


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleSolution:
    q_star: np.ndarray
    v_star: np.ndarray
    pi_star: np.ndarray
    residual: float
    iterations: int


def _iteration_guard(tol, gamma):
    return max(10, 10 * math.ceil(math.log(1.0 / (tol * (1.0 - gamma))) / (1.0 - gamma)))


def value_iteration_exact(mdp, tol=1e-8, validate=True):
    """Synchronous Q-value iteration from zero.

    Stops once successive iterates differ by at most ``tol * (1 - gamma) / (2 * gamma)``
    in sup norm, which puts the returned table within ``tol / 2`` of Q*.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if validate:
        validate_mdp(mdp)
    gamma = mdp.gamma
    threshold = tol * (1.0 - gamma) / (2.0 * gamma)
    guard = _iteration_guard(tol, gamma)
    P, rbar = mdp.transition_matrix, mdp.expected_rewards
    q = np.zeros(mdp.shape)
    for it in range(1, guard + 1):
        q_next = rbar + gamma * (P @ q.max(axis=1)).reshape(mdp.shape)
        step = np.max(np.abs(q_next - q))
        q = q_next
        if step <= threshold:
            break
    else:
        raise ConvergenceError(f"value iteration did not converge in {guard} iterations")
    v, pi = greedy_from_q(q)
    residual = float(np.max(np.abs(bellman_apply(q, mdp) - q)))
    return OracleSolution(q, v, pi, residual, it)


def policy_value_exact(mdp, policy):
    """v^pi from the linear system (I - gamma P_pi) v = r̄_pi."""
    policy = check_policy(policy, mdp.num_states, mdp.num_actions)
    S, gamma = mdp.num_states, mdp.gamma
    P_pi, r_pi = mdp.policy_matrix(policy)
    if S > DIRECT_SOLVE_MAX_STATES:
        return _policy_value_iterative(mdp, policy, r_pi)
    system = sp.identity(S, format="csc") - gamma * P_pi.tocsc()
    try:
        if S <= DENSE_SOLVE_MAX_STATES:
            v = np.linalg.solve(system.toarray(), r_pi)
        else:
            v = splu(system).solve(r_pi)
    except (np.linalg.LinAlgError, RuntimeError) as exc:
        raise np.linalg.LinAlgError(
            "policy evaluation system is singular; the transition kernel is corrupt") from exc
    residual = np.max(np.abs(system @ v - r_pi))
    if not np.isfinite(residual) or residual > 1e-9 * S:
        raise np.linalg.LinAlgError(f"policy evaluation residual {residual:g} too large")
    return v


def _policy_value_iterative(mdp, policy, r_pi):
    v = np.zeros(mdp.num_states)
    threshold = FALLBACK_TOL * (1.0 - mdp.gamma) / (2.0 * mdp.gamma)
    for _ in range(_iteration_guard(FALLBACK_TOL, mdp.gamma)):
        v_next = policy_operator_apply(v, policy, mdp)
        if np.max(np.abs(v_next - v)) <= threshold:
            return v_next
        v = v_next
    raise ConvergenceError("fixed-point policy evaluation did not converge")


def epsilon_optimality_gap(mdp, policy, tol=1e-8, solution=None):
    """Sup-norm distance between v* and v^pi (pass ``solution`` to reuse an oracle run)."""
    if solution is None:
        solution = value_iteration_exact(mdp, tol)
    return float(np.max(np.abs(solution.v_star - policy_value_exact(mdp, policy))))


class ValueIteration(BaseEstimator):
    """Exact value iteration exposed as an estimator over a :class:`TabularMdp`.

    Parameters
    ----------
    tol : float
        Target sup-norm accuracy of the returned Q table.
    """

    def __init__(self, tol=1e-8):
        self.tol = tol

    def fit(self, mdp):
        sol = value_iteration_exact(mdp, self.tol)
        self.q_ = sol.q_star
        self.values_ = sol.v_star
        self.policy_ = sol.pi_star
        self.residual_ = sol.residual
        self.n_iter_ = sol.iterations
        return self

    def predict(self, states):
        check_is_fitted(self, "policy_")
        return self.policy_[np.asarray(states, dtype=np.int64)]
