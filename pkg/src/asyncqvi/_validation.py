"""Input validation helpers shared by the estimators and the operators."""

import numbers

import numpy as np
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

__all__ = ["NotFittedError", "check_delta", "check_epsilon", "check_gamma",
           "check_is_fitted", "check_policy", "check_positive_int", "check_q_table",
           "check_random_state", "check_values"]


def check_gamma(gamma):
    if not isinstance(gamma, numbers.Real) or not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma!r}")
    return float(gamma)


def check_epsilon(epsilon, gamma):
    upper = 1.0 / (1.0 - gamma)
    if not isinstance(epsilon, numbers.Real) or not 0.0 < epsilon < upper:
        raise ValueError(f"epsilon must lie in (0, {upper:g}), got {epsilon!r}")
    return float(epsilon)


def check_delta(delta):
    if not isinstance(delta, numbers.Real) or not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    return float(delta)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise ValueError(f"{seed!r} cannot be used to seed a numpy Generator")


def check_q_table(q, num_states, num_actions):
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (num_states, num_actions):
        raise ValueError(
            f"Q table has shape {q.shape}, expected {(num_states, num_actions)}")
    if not np.all(np.isfinite(q)):
        raise ValueError("Q table contains non-finite entries")
    return q


def check_values(v, num_states):
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (num_states,):
        raise ValueError(f"value vector has shape {v.shape}, expected ({num_states},)")
    if not np.all(np.isfinite(v)):
        raise ValueError("value vector contains non-finite entries")
    return v


def check_policy(policy, num_states, num_actions):
    policy = np.asarray(policy)
    if policy.shape != (num_states,):
        raise ValueError(f"policy has shape {policy.shape}, expected ({num_states},)")
    if policy.size and not np.issubdtype(policy.dtype, np.integer):
        raise TypeError("policy entries must be integer action indices")
    policy = policy.astype(np.int64, copy=False)
    if policy.size and (policy.min() < 0 or policy.max() >= num_actions):
        raise ValueError(f"policy entries must lie in [0, {num_actions})")
    return policy
