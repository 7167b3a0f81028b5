"""Iteration/sample budgets, contraction rates, and an empirical concentration check.

The budget formulas are evaluated in 50-digit arithmetic before taking the ceiling so
that values landing just above an integer are not rounded down by float error.
"""

from dataclasses import dataclass

import mpmath
import numpy as np

from ._validation import (check_delta, check_epsilon, check_gamma, check_positive_int,
                          check_random_state)
from .mdp import sampled_backup

_DPS = 50


@dataclass(frozen=True)
class AsynchronismBound:
    """Update-gap bound ``b1`` and staleness bound ``b2``; (1, 1) is synchronous."""
    b1: int
    b2: int

    def __post_init__(self):
        check_positive_int(self.b1, "b1")
        check_positive_int(self.b2, "b2")


def _as_bound(bounds):
    return bounds if isinstance(bounds, AsynchronismBound) else AsynchronismBound(*bounds)


def iteration_bound_L(epsilon, gamma, bounds):
    """Iterations after which the expected-update sequence is within epsilon/2 of Q*."""
    gamma = check_gamma(gamma)
    epsilon = check_epsilon(epsilon, gamma)
    b = _as_bound(bounds)
    with mpmath.workdps(_DPS):
        g, e = mpmath.mpf(gamma), mpmath.mpf(epsilon)
        value = 2 * b.b1 + (b.b1 + b.b2 - 1) / (1 - g) * mpmath.log(2 / ((1 - g) * e))
        return int(mpmath.ceil(value))


def sample_bound_K(epsilon, gamma, delta, L):
    """Samples per update so every one of L backups is (1-γ)ε/4-accurate w.p. 1-δ."""
    gamma = check_gamma(gamma)
    epsilon = check_epsilon(epsilon, gamma)
    delta = check_delta(delta)
    L = check_positive_int(L, "L")
    with mpmath.workdps(_DPS):
        g, e, d = mpmath.mpf(gamma), mpmath.mpf(epsilon), mpmath.mpf(delta)
        value = 8 / ((1 - g) ** 4 * e ** 2) * mpmath.log(4 * L / d)
        return int(mpmath.ceil(value))


def contraction_rate_rho(gamma, bounds):
    gamma = check_gamma(gamma)
    b = _as_bound(bounds)
    with mpmath.workdps(_DPS):
        return float(mpmath.mpf(gamma) ** (mpmath.mpf(1) / (b.b1 + b.b2 - 1)))


def hoeffding_trial_check(gm, mdp, v_hat, pairs, K, epsilon, gamma, trials,
                          random_state=None):
    """Fraction of trials whose K-sample backup misses the exact one by > (1-γ)ε/4.

    Each trial picks a pair uniformly from ``pairs``, draws K samples from ``gm`` and
    compares ``mean_r + γ mean_v`` with ``r̄ + γ p·v_hat`` computed from ``mdp``.
    """
    rng = check_random_state(random_state)
    check_positive_int(K, "K")
    check_positive_int(trials, "trials")
    pairs = [tuple(p) for p in pairs]
    if not pairs:
        raise ValueError("need at least one (state, action) pair")
    v_hat = np.asarray(v_hat, dtype=np.float64)
    radius = (1.0 - gamma) * epsilon / 4.0
    exact = {}
    for i, a in set(pairs):
        js, p, _ = mdp.row(i, a)
        exact[i, a] = mdp.expected_rewards[i, a] + gamma * float(p @ v_hat[js])
    failures = 0
    for choice in rng.integers(len(pairs), size=trials):
        i, a = pairs[choice]
        mean_r, mean_v, _ = sampled_backup(gm, i, a, v_hat, K, rng)
        failures += abs(mean_r + gamma * mean_v - exact[i, a]) > radius
    return failures / trials
