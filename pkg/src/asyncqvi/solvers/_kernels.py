"""nogil worker loops for models that provide a :class:`~asyncqvi.mdp.CompiledSampler`.

Each call runs one worker until the shared counter reaches ``limit``. Worker-private
progress lives in ``wstate`` = [step, next_state, since_copy] so a run can be paused
and resumed; per-worker counters go to ``wstats`` (see ``STAT_*``).
"""

import numpy as np
from numba import njit

from ._atomics import atomic_add, atomic_load, atomic_max, claim_iteration, release, spin_acquire
from .config import TRAJECTORY_RESTART, _evaluate

STAT_ACCEPTED, STAT_REJECTED, STAT_SAMPLES, STAT_MAX_GAP, STAT_MAX_AGE = range(5)
NUM_STATS = 5

UNIFORM, CYCLIC, TRAJECTORY = range(3)


@njit(nogil=True)
def _select(selector, step, current, lo, hi, n_states, n_actions):
    if selector == CYCLIC:
        p = lo + step % (hi - lo)
        return p // n_actions, p % n_actions
    if selector == TRAJECTORY and step % TRAJECTORY_RESTART != 0 and current >= 0:
        return current, np.random.randint(0, n_actions)
    return np.random.randint(0, n_states), np.random.randint(0, n_actions)


@njit(nogil=True)
def _record_visit(last_update, pair, t, wstats):
    prev = atomic_max(last_update, pair, t)
    if prev < t:
        gap = t - prev  # prev == -1 on first visit, so gap counts iterations from 0
        if gap > wstats[STAT_MAX_GAP]:
            wstats[STAT_MAX_GAP] = gap


@njit(nogil=True)
def qvi_worker(params, draw_mean, v, pi, locks, counter, limit, seed,
               selector, lo, hi, n_states, n_actions, copy_period,
               k_code, k_value, k_exponent, k_bound, correction, gamma,
               wstate, wstats, last_update,
               record, log_cursor, log_iter, log_state, log_action, log_value):
    np.random.seed(seed)
    v_hat = np.empty(n_states)
    taken_at = 0
    step, current, since_copy = wstate[0], wstate[1], copy_period
    while True:
        t = claim_iteration(counter, limit)
        if t < 0:
            break
        i, a = _select(selector, step, current, lo, hi, n_states, n_actions)
        if since_copy >= copy_period:
            taken_at = atomic_load(counter, 0)
            for s in range(n_states):  # plain loop; numba's slice copy is far slower
                v_hat[s] = v[s]
            since_copy = 0
        since_copy += 1
        K = int(_evaluate(k_code, k_value, k_exponent, k_bound, t + 1.0))
        mean_r, mean_v, j = draw_mean(params, i, a, K, v_hat)
        q = mean_r + gamma * mean_v - correction
        age = atomic_load(counter, 0) - taken_at
        if age > wstats[STAT_MAX_AGE]:
            wstats[STAT_MAX_AGE] = age
        # the guard is re-checked under the lock so a stale q never lowers v[i]
        accepted = False
        if q > v[i]:
            spin_acquire(locks, i)
            if q > v[i]:
                v[i] = q
                pi[i] = a
                accepted = True
                if record:
                    slot = atomic_add(log_cursor, 0, 1)
                    log_iter[slot] = t
                    log_state[slot] = i
                    log_action[slot] = a
                    log_value[slot] = q
            release(locks, i)
        if accepted:
            wstats[STAT_ACCEPTED] += 1
        else:
            wstats[STAT_REJECTED] += 1
        wstats[STAT_SAMPLES] += K
        _record_visit(last_update, i * n_actions + a, t, wstats)
        step += 1
        current = j
    wstate[0] = step
    wstate[1] = current


@njit(nogil=True)
def aql_worker(params, draw, v, pi, q_table, locks, counter, limit, seed,
               selector, lo, hi, n_states, n_actions,
               a_code, a_value, a_exponent, a_bound, gamma,
               wstate, wstats, last_update,
               record, log_cursor, log_iter, log_state, log_action, log_value):
    np.random.seed(seed)
    step, current = wstate[0], wstate[1]
    while True:
        t = claim_iteration(counter, limit)
        if t < 0:
            break
        i, a = _select(selector, step, current, lo, hi, n_states, n_actions)
        j, r = draw(params, i, a)
        alpha = _evaluate(a_code, a_value, a_exponent, a_bound, t + 1.0)
        target = r + gamma * v[j]
        spin_acquire(locks, i)
        q_table[i, a] = (1.0 - alpha) * q_table[i, a] + alpha * target
        best = 0
        for b in range(1, n_actions):
            if q_table[i, b] > q_table[i, best]:
                best = b
        v[i] = q_table[i, best]
        pi[i] = best
        if record:
            slot = atomic_add(log_cursor, 0, 1)
            log_iter[slot] = t
            log_state[slot] = i
            log_action[slot] = best
            log_value[slot] = v[i]
        release(locks, i)
        wstats[STAT_ACCEPTED] += 1
        wstats[STAT_SAMPLES] += 1
        _record_visit(last_update, i * n_actions + a, t, wstats)
        step += 1
        current = j
    wstate[0] = step
    wstate[1] = current
