import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asyncqvi import (MdpValidationError, TabularGenerativeModel, TabularMdp, bellman_apply,
                      greedy_from_q, policy_operator_apply, policy_value_exact, random_mdp,
                      validate_mdp)
from asyncqvi.mdp import fast_binomial, sampled_backup, tabular_draw_mean

from conftest import dense_arrays, self_loop


def naive_bellman(q, mdp):
    P, R = dense_arrays(mdp)
    S, A = mdp.num_states, mdp.num_actions
    out = np.zeros((S, A))
    for i in range(S):
        for a in range(A):
            for j in range(S):
                out[i, a] += P[i, a, j] * R[i, a, j] + mdp.gamma * P[i, a, j] * max(q[j])
    return out


def naive_policy_op(v, policy, mdp):
    P, R = dense_arrays(mdp)
    out = np.zeros(mdp.num_states)
    for i in range(mdp.num_states):
        a = policy[i]
        for j in range(mdp.num_states):
            out[i] += P[i, a, j] * (R[i, a, j] + mdp.gamma * v[j])
    return out


def test_validate_accepts_two_state_half_rows():
    P = np.array([[[0.5, 0.5]], [[0.5, 0.5]]])
    validate_mdp(TabularMdp.from_dense(P, np.zeros((2, 1)), 0.9))


def test_validate_row_sum_names_pair():
    mdp = TabularMdp.from_transitions(2, 2, 0.9, [
        (0, 0, 0, 1.0, 0), (0, 1, 0, 1.0, 0), (1, 0, 1, 1.0, 0), (1, 1, 0, 0.9, 0)])
    with pytest.raises(MdpValidationError) as err:
        validate_mdp(mdp)
    assert (err.value.state, err.value.action) == (1, 1)
    assert "i=1, a=1" in str(err.value)


def test_validate_reward_range():
    mdp = TabularMdp.from_transitions(2, 1, 0.9, [(0, 0, 1, 1.0, 1.5), (1, 0, 1, 1.0, 0)])
    with pytest.raises(MdpValidationError, match="outside"):
        validate_mdp(mdp)


@pytest.mark.parametrize("gamma", [0.0, 1.0, -0.2, 1.3])
def test_validate_gamma(gamma):
    mdp = TabularMdp.from_transitions(1, 1, gamma, [(0, 0, 0, 1.0, 0.0)])
    with pytest.raises(MdpValidationError, match="gamma"):
        validate_mdp(mdp)


def test_random_mdp_is_valid_and_seeded():
    a = random_mdp(7, 3, 0.8, density=0.5, random_state=3)
    b = random_mdp(7, 3, 0.8, density=0.5, random_state=3)
    validate_mdp(a)
    assert np.array_equal(a.probs, b.probs) and np.array_equal(a.next_states, b.next_states)
    assert np.all(np.diff(a.indptr) == 4)


def test_bellman_self_loop():
    mdp = self_loop()
    assert bellman_apply(np.zeros((1, 1)), mdp)[0, 0] == pytest.approx(1.0)
    assert bellman_apply(np.full((1, 1), 10.0), mdp)[0, 0] == pytest.approx(10.0)


def test_bellman_matches_triple_loop():
    mdp = random_mdp(3, 2, 0.9, random_state=1)
    q = np.random.default_rng(2).random((3, 2)) * 5
    np.testing.assert_allclose(bellman_apply(q, mdp), naive_bellman(q, mdp), atol=1e-12)


def test_bellman_shape_mismatch():
    with pytest.raises(ValueError):
        bellman_apply(np.zeros((2, 2)), self_loop())


def test_policy_operator_fixed_point_and_naive():
    assert policy_operator_apply(np.array([10.0]), np.array([0]), self_loop())[0] == \
        pytest.approx(10.0)
    mdp = random_mdp(5, 3, 0.85, density=0.6, random_state=4)
    rng = np.random.default_rng(5)
    v = rng.random(5) * 3
    pi = rng.integers(3, size=5)
    np.testing.assert_allclose(policy_operator_apply(v, pi, mdp), naive_policy_op(v, pi, mdp),
                               atol=1e-12)


def test_greedy_examples():
    v, pi = greedy_from_q(np.array([[1.0, 2.0], [3.0, 0.0]]))
    assert v.tolist() == [2.0, 3.0] and pi.tolist() == [1, 0]
    assert greedy_from_q(np.array([[1.0, 1.0]]))[1].tolist() == [0]


def test_greedy_matches_scalar_loop():
    q = np.round(np.random.default_rng(0).random((5, 3)) * 4) / 4  # forces some ties
    v, pi = greedy_from_q(q)
    for i in range(5):
        best = 0
        for a in range(1, 3):
            if q[i, a] > q[i, best]:
                best = a
        assert pi[i] == best and v[i] == q[i, best]


mdp_seeds = st.integers(0, 10_000)


@settings(max_examples=100, deadline=None)
@given(seed=mdp_seeds)
def test_bellman_is_gamma_contraction(seed):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(int(rng.integers(1, 7)), int(rng.integers(1, 4)),
                     float(rng.uniform(0.1, 0.99)), density=float(rng.uniform(0.2, 1)),
                     random_state=seed)
    q1 = rng.normal(size=mdp.shape) * 5
    q2 = rng.normal(size=mdp.shape) * 5
    lhs = np.max(np.abs(bellman_apply(q1, mdp) - bellman_apply(q2, mdp)))
    assert lhs <= mdp.gamma * np.max(np.abs(q1 - q2)) + 1e-12


@settings(max_examples=100, deadline=None)
@given(seed=mdp_seeds)
def test_policy_operator_monotone_and_contractive(seed):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(4, 3, float(rng.uniform(0.1, 0.99)), density=0.7, random_state=seed)
    pi = rng.integers(3, size=4)
    v = rng.normal(size=4)
    w = v + rng.random(4)
    assert np.all(policy_operator_apply(v, pi, mdp) <= policy_operator_apply(w, pi, mdp) + 1e-12)
    u = rng.normal(size=4) * 3
    lhs = np.max(np.abs(policy_operator_apply(v, pi, mdp) - policy_operator_apply(u, pi, mdp)))
    assert lhs <= mdp.gamma * np.max(np.abs(v - u)) + 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=mdp_seeds, c=st.floats(0.0, 2.0))
def test_lower_bound_below_policy_value(seed, c):
    # if v' <= v and v <= T_pi v' then v <= v^pi
    rng = np.random.default_rng(seed)
    mdp = random_mdp(5, 2, float(rng.uniform(0.3, 0.95)), random_state=seed)
    pi = rng.integers(2, size=5)
    v_pi = policy_value_exact(mdp, pi)
    v = v_pi * rng.uniform(0, 1, size=5)
    v_prime = v - c
    if np.all(v <= policy_operator_apply(v_prime, pi, mdp)):
        assert np.all(v <= v_pi + 1e-9)


def test_generative_model_frequencies():
    mdp = TabularMdp.from_transitions(3, 1, 0.9, [
        (0, 0, 0, 0.2, 0.1), (0, 0, 1, 0.5, 0.2), (0, 0, 2, 0.3, 0.3),
        (1, 0, 1, 1.0, 0.0), (2, 0, 2, 1.0, 0.0)])
    gm = TabularGenerativeModel(mdp)
    rng = np.random.default_rng(0)
    n = 20_000
    js = np.array([gm.sample(0, 0, rng)[0] for _ in range(n)])
    freq = np.bincount(js, minlength=3) / n
    se = np.sqrt(np.array([0.2, 0.5, 0.3]) * np.array([0.8, 0.5, 0.7]) / n)
    assert np.all(np.abs(freq - [0.2, 0.5, 0.3]) <= 4 * se)


@pytest.mark.parametrize("K", [1, 10, 63, 64, 1000, 10 ** 6])
def test_sample_mean_moments(K):
    # mean of K-sample averages is the exact expectation; variance is var/K
    mdp = TabularMdp.from_transitions(3, 1, 0.9, [
        (0, 0, 0, 0.2, 0.1), (0, 0, 1, 0.5, 0.2), (0, 0, 2, 0.3, 0.9),
        (1, 0, 1, 1.0, 0.0), (2, 0, 2, 1.0, 0.0)])
    gm = TabularGenerativeModel(mdp)
    values = np.array([1.0, 4.0, -2.0])
    p = np.array([0.2, 0.5, 0.3])
    mean_v, var_v = p @ values, p @ values ** 2 - (p @ values) ** 2
    rng = np.random.default_rng(K)
    reps = 3000
    draws = np.array([gm.sample_mean(0, 0, K, values, rng)[1] for _ in range(reps)])
    assert abs(draws.mean() - mean_v) <= 4 * np.sqrt(var_v / K / reps)
    assert draws.var() == pytest.approx(var_v / K, rel=0.15)


def test_sampled_backup_without_sample_mean():
    class OnlySample:
        num_states, num_actions = 2, 1

        def sample(self, state, action, rng):
            return 1, 0.5

    mean_r, mean_v, j = sampled_backup(OnlySample(), 0, 0, np.array([0.0, 3.0]), 7,
                                       np.random.default_rng(0))
    assert (mean_r, mean_v, j) == (0.5, 3.0, 1)


def test_compiled_draw_mean_matches_expectation():
    mdp = random_mdp(4, 2, 0.9, random_state=9)
    gm = TabularGenerativeModel(mdp)
    values = np.arange(4, dtype=float)
    js, p, r = mdp.row(2, 1)
    exact = p @ values[js]
    c = gm.compiled
    for K in (5, 10 ** 7):
        means = np.array([tabular_draw_mean(c.params, 2, 1, K, values)[1] for _ in range(400)])
        sd = np.sqrt((p @ values[js] ** 2 - exact ** 2) / K)
        assert abs(means.mean() - exact) <= 4 * sd / 20


def test_fast_binomial_distribution():
    from numba import njit
    from scipy import stats

    @njit
    def draws(n, p, m, seed):
        np.random.seed(seed)
        out = np.empty(m, np.int64)
        for k in range(m):
            out[k] = fast_binomial(n, p)
        return out

    for n, p in [(5000, 0.3), (400, 0.93), (10 ** 7, 0.01)]:
        x = draws(n, p, 20_000, 1)
        # chi-square against the exact pmf on bins (e_{k-1}, e_k]
        edges = np.unique(stats.binom.ppf(np.linspace(0, 1, 21)[1:-1], n, p))
        obs = np.bincount(np.searchsorted(edges, x, side="left"), minlength=len(edges) + 1)
        cdf = stats.binom.cdf(np.concatenate([edges, [n]]), n, p)
        exp = np.diff(np.concatenate([[0.0], cdf])) * len(x)
        assert stats.chisquare(obs, exp).pvalue > 1e-3
    assert draws(10, 0.0, 5, 0).max() == 0 and draws(10, 1.0, 5, 0).min() == 10
