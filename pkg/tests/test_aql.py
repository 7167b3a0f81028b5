import numpy as np
import pytest

from asyncqvi import (AsyncQLearning, ScheduleSpec, SolverConfig, TabularGenerativeModel,
                      TabularMdp, aql_run, random_mdp, value_iteration_exact)
from asyncqvi.solvers import compute_q_sample

BACKENDS = ["python", "compiled"]


def deterministic_mdp(S=5, A=2, gamma=0.8, seed=0):
    rng = np.random.default_rng(seed)
    tr = [(i, a, int(rng.integers(S)), 1.0, float(rng.random()))
          for i in range(S) for a in range(A)]
    return TabularMdp.from_transitions(S, A, gamma, tr)


@pytest.mark.parametrize("backend", BACKENDS)
def test_unit_stepsize_is_gauss_seidel(backend):
    mdp = deterministic_mdp()
    S, A = mdp.shape
    L = 300
    cfg = SolverConfig(gamma=0.8, L=L, selector="cyclic")
    _, v, stats = aql_run(TabularGenerativeModel(mdp), cfg, ScheduleSpec.constant_stepsize(1.0),
                          backend=backend)
    q = np.zeros((S, A))
    for t in range(L):
        i, a = divmod(t % (S * A), A)
        js, _, rs = mdp.row(i, a)
        q[i, a] = rs[0] + 0.8 * q[js[0]].max()
    np.testing.assert_allclose(stats.extra["q"], q, atol=1e-12)
    np.testing.assert_allclose(v, q.max(axis=1), atol=1e-12)


def test_single_sample_kinship():
    # unit stepsize and K=1 uncorrected AsyncQVI backups draw the same samples
    mdp = random_mdp(4, 2, 0.9, random_state=3)
    gm = TabularGenerativeModel(mdp)
    L = 400
    cfg = SolverConfig(gamma=0.9, L=L, selector="cyclic", seed=11)
    _, _, stats = aql_run(gm, cfg, ScheduleSpec.constant_stepsize(1.0), backend="python")
    rng = np.random.default_rng(np.random.SeedSequence(11).spawn(1)[0])
    q = np.zeros((4, 2))
    for t in range(L):
        i, a = divmod(t % 8, 2)
        q[i, a] = compute_q_sample(gm, i, a, q.max(axis=1), 1, 0.1, 0.9, correction=False,
                                   rng=rng)
    np.testing.assert_array_equal(stats.extra["q"], q)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("stepsize", ["constant", "adaptive"])
def test_converges_on_small_mdp(backend, stepsize):
    mdp = random_mdp(5, 2, 0.8, random_state=4)
    v_star = value_iteration_exact(mdp).v_star
    est = AsyncQLearning(n_iterations=300_000, stepsize=stepsize, alpha=0.05, n_threads=2,
                         backend=backend, random_state=2).fit(mdp)
    assert np.max(np.abs(est.values_ - v_star)) <= 0.5
    assert np.all(est.q_ <= 1 / (1 - 0.8) + 1e-12) and np.all(est.q_ >= 0)
    assert est.stats_.samples_drawn == 300_000


def test_estimator_errors():
    with pytest.raises(ValueError):
        AsyncQLearning(stepsize="fast").fit(random_mdp(3, 2, 0.9, random_state=0))
    with pytest.raises(ValueError):
        aql_run(TabularGenerativeModel(random_mdp(3, 2, 0.9, random_state=0)),
                SolverConfig(gamma=0.9, L=10), ScheduleSpec.constant_samples(3))
    est = AsyncQLearning(stepsize=ScheduleSpec.diminishing_stepsize(0.6), n_iterations=100)
    assert est.fit(random_mdp(3, 2, 0.9, random_state=0)).predict([0, 1, 2]).shape == (3,)
