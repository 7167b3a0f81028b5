import threading

import numpy as np
import pytest
from scipy import stats

from asyncqvi.solvers import SharedTable, conditional_commit, select_coordinate, snapshot_values


def test_commit_examples():
    sh = SharedTable(3)
    assert conditional_commit(sh, 1, 2, 0.5)
    assert (sh.v[1], sh.pi[1]) == (0.5, 2)
    assert not conditional_commit(sh, 1, 0, 0.5)
    assert (sh.v[1], sh.pi[1]) == (0.5, 2)
    assert not conditional_commit(sh, 1, 0, -1.0)
    with pytest.raises(ValueError):
        conditional_commit(sh, 0, 0, float("nan"))


def test_counter_claims_exactly_limit():
    sh = SharedTable(2)
    got = [sh.claim(5) for _ in range(7)]
    assert got == [0, 1, 2, 3, 4, -1, -1] and sh.t == 5


def test_hammer_one_state():
    # 8 threads, 10^6 commits of random q on one state
    sh = SharedTable(1, record_commits=True)
    per_thread = 125_000

    def work(seed):
        rng = np.random.default_rng(seed)
        qs = rng.random(per_thread).tolist()
        for k, q in enumerate(qs):
            sh.commit(0, seed, q, k)

    threads = [threading.Thread(target=work, args=(s,)) for s in range(8)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    trace = np.array([entry[3] for entry in sh.log])
    assert np.all(np.diff(trace) > 0)
    assert sh.v[0] == trace[-1] == trace.max()
    assert sh.pi[0] == sh.log[-1][2]


def test_snapshot_single_thread():
    sh = SharedTable(4)
    sh.commit(2, 1, 0.7)
    snap = snapshot_values(sh)
    assert np.array_equal(snap.v_hat, sh.v) and snap.taken_at == sh.t
    snap.v_hat[0] = 9.0
    assert sh.v[0] == 0.0


def test_concurrent_snapshots_and_pairs_are_committed_values():
    S = 16
    sh = SharedTable(S, record_commits=True)
    stop = threading.Event()
    snaps, pairs = [], []

    def writer(seed):
        rng = np.random.default_rng(seed)
        for _ in range(20_000):
            i = int(rng.integers(S))
            sh.commit(i, int(rng.integers(4)), float(sh.v[i] + rng.random()))

    def reader():
        while not stop.is_set():
            snaps.append(sh.snapshot().v_hat)
            i = len(snaps) % S
            pairs.append((i,) + sh.read_pair(i))

    writers = [threading.Thread(target=writer, args=(s,)) for s in range(4)]
    rd = threading.Thread(target=reader)
    rd.start()
    for w in writers:
        w.start()
    for w in writers:
        w.join()
    stop.set()
    rd.join()
    committed = {i: {0.0} for i in range(S)}
    committed_pairs = {(i, 0.0, 0) for i in range(S)}
    for _, i, a, q in sh.log:
        committed[i].add(q)
        committed_pairs.add((i, q, a))
    assert len(snaps) > 0
    for snap in snaps:
        assert all(snap[i] in committed[i] for i in range(S))
    assert all(p in committed_pairs for p in pairs)


def test_cyclic_single_worker():
    seq = [select_coordinate("cyclic", 0, k, 2, 2, None) for k in range(5)]
    assert seq == [(0, 0), (0, 1), (1, 0), (1, 1), (0, 0)]


def test_cyclic_blocks_cover_pairs():
    S, A, T = 7, 3, 4
    seen = set()
    for w in range(T):
        seen |= {select_coordinate("cyclic", w, k, S, A, None, num_workers=T)
                 for k in range(S * A)}
    assert seen == {(i, a) for i in range(S) for a in range(A)}


def test_uniform_chi_square():
    rng = np.random.default_rng(0)
    draws = [select_coordinate("uniform", 0, k, 4, 2, rng) for k in range(100_000)]
    counts = np.bincount([i * 2 + a for i, a in draws], minlength=8)
    assert stats.chisquare(counts).pvalue > 0.01


def test_trajectory_follows_next_state():
    rng = np.random.default_rng(0)
    assert select_coordinate("trajectory", 0, 5, 10, 3, rng, next_state=7)[0] == 7
    i, a = select_coordinate("trajectory", 0, 200, 10, 3, rng, next_state=7)
    assert 0 <= i < 10 and 0 <= a < 3
    with pytest.raises(ValueError):
        select_coordinate("trajectory", 0, 5, 10, 3, rng)
    with pytest.raises(ValueError):
        select_coordinate("sweep", 0, 0, 10, 3, rng)
