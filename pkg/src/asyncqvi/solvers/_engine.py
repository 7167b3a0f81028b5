"""Worker orchestration shared by every asynchronous solver.

An :class:`AsyncRun` owns the shared table, the per-worker private state and the
instrumentation. ``advance(until)`` starts the workers, lets them claim iterations
until the global counter reaches ``until`` and joins them, so callers can pause at a
quiescent point, inspect (v, pi), and resume.
"""

import threading
import time

import numpy as np

from ..mdp import sampled_backup
from . import _kernels as K
from .config import AsyncRunStats, CommitLog, schedule_value
from .shared import SharedTable, cyclic_block, select_coordinate

QVI, QVI_EXACT, AQL = "qvi", "qvi_exact", "aql"


class _PyWorker:
    def __init__(self, worker_id, rng, copy_period):
        self.worker_id = worker_id
        self.rng = rng
        self.step = 0
        self.next_state = None
        self.snapshot = None
        self.since_copy = copy_period
        self.accepted = self.rejected = self.samples = 0
        self.max_gap = self.max_age = 0


class AsyncRun:
    """One solver run; see the module docstring.

    ``kind`` is ``"qvi"`` (sampled AsyncQVI), ``"qvi_exact"`` (exact expectations from
    ``mdp``) or ``"aql"`` (asynchronous Q-learning with ``schedule`` as stepsize).
    """

    def __init__(self, kind, model, *, num_threads, limit, schedule, gamma, selector,
                 copy_period=1, correction=0.0, seed=0, backend="auto",
                 record_commits=False, on_iteration=None):
        self.kind = kind
        self.model = model
        self.num_threads = num_threads
        self.limit = limit
        self.schedule = schedule
        self.gamma = gamma
        self.selector = selector
        self.copy_period = copy_period
        self.correction = correction
        self.seed = int(seed)
        self.on_iteration = on_iteration
        self.backend = self._pick_backend(backend)
        S, A = model.num_states, model.num_actions
        self.shared = SharedTable(S, A, with_q=kind in (AQL, QVI_EXACT),
                                  record_commits=record_commits and self.backend == "python")
        self.last_update = np.full(S * A, -1, dtype=np.int64)
        self.wall_time = 0.0
        self.segments = 0
        self.record_commits = record_commits
        if self.backend == "python":
            seqs = np.random.SeedSequence(self.seed).spawn(num_threads)
            self._workers = [_PyWorker(w, np.random.default_rng(s), copy_period)
                             for w, s in enumerate(seqs)]
        else:
            self._wstate = np.zeros((num_threads, 3), dtype=np.int64)
            self._wstate[:, 1] = -1
            self._wstats = np.zeros((num_threads, K.NUM_STATS), dtype=np.int64)
            n_log = limit if record_commits else 0
            self._log_cursor = np.zeros(1, dtype=np.int64)
            self._log = (np.zeros(n_log, np.int64), np.zeros(n_log, np.int64),
                         np.zeros(n_log, np.int64), np.zeros(n_log, np.float64))

    def _pick_backend(self, backend):
        compiled = getattr(self.model, "compiled", None) if self.kind != QVI_EXACT else None
        if backend == "auto":
            return "compiled" if compiled is not None else "python"
        if backend == "compiled" and compiled is None:
            raise ValueError("this model has no compiled sampler; use backend='python'")
        if backend not in ("python", "compiled"):
            raise ValueError(f"unknown backend {backend!r}")
        return backend

    @property
    def iterations_done(self):
        return self.shared.t

    def advance(self, until=None):
        """Run workers until the counter reaches ``until`` (default: the full budget)."""
        until = self.limit if until is None else min(until, self.limit)
        if until <= self.shared.t:
            return
        target = self._python_worker if self.backend == "python" else self._compiled_worker
        if self.backend == "compiled" and self.segments == 0:
            # zero-iteration call: compile outside the timed region
            self._compiled_worker(0, self.shared.t)
        start = time.perf_counter()
        if self.num_threads == 1 and self.backend == "python":
            target(0, until)  # inline, so hook exceptions propagate
        else:
            # compiled kernels run measurably slower on the main thread, so a
            # single worker gets its own thread too and baselines stay comparable
            threads = [threading.Thread(target=target, args=(w, until), daemon=True)
                       for w in range(self.num_threads)]
            for th in threads:
                th.start()
            for th in threads:
                th.join()
        self.wall_time += time.perf_counter() - start
        self.segments += 1

    # -- pure-Python workers --------------------------------------------------------

    def _python_worker(self, worker_id, until):
        w = self._workers[worker_id]
        shared, model = self.shared, self.model
        S, A = model.num_states, model.num_actions
        while True:
            t = shared.claim(until)
            if t < 0:
                return
            i, a = select_coordinate(self.selector, worker_id, w.step, S, A, w.rng,
                                     self.num_threads, w.next_state)
            if self.kind == AQL:
                j, r = model.sample(i, a, w.rng)
                alpha = schedule_value(self.schedule, t + 1)
                shared.relax(i, a, r + self.gamma * shared.v[j], alpha, t)
                w.accepted += 1
                w.samples += 1
                q, accepted = shared.q[i, a], True
            else:
                if w.since_copy >= self.copy_period:
                    w.snapshot = shared.snapshot()
                    w.since_copy = 0
                w.since_copy += 1
                v_hat = w.snapshot.v_hat
                if self.kind == QVI_EXACT:
                    js, p, _ = model.row(i, a)
                    q = model.expected_rewards[i, a] + self.gamma * float(p @ v_hat[js])
                    shared.q[i, a] = q
                    j = -1
                    if self.selector == "trajectory":
                        pick = np.searchsorted(np.cumsum(p), w.rng.random())
                        j = js[min(pick, len(js) - 1)]
                else:
                    n = schedule_value(self.schedule, t + 1)
                    mean_r, mean_v, j = sampled_backup(model, i, a, v_hat, n, w.rng)
                    q = mean_r + self.gamma * mean_v - self.correction
                    w.samples += n
                w.max_age = max(w.max_age, shared.t - w.snapshot.taken_at)
                accepted = shared.commit(i, a, q, t)
                if accepted:
                    w.accepted += 1
                else:
                    w.rejected += 1
            pair = i * A + a
            prev = self.last_update[pair]
            if prev < t:
                self.last_update[pair] = t
                w.max_gap = max(w.max_gap, t - prev)
            w.step += 1
            w.next_state = int(j) if j >= 0 else None
            if self.on_iteration is not None:
                self.on_iteration(t, i, a, q, accepted, shared)

    # -- compiled workers -----------------------------------------------------------

    def _compiled_worker(self, worker_id, until):
        sampler = self.model.compiled
        S, A = self.model.num_states, self.model.num_actions
        lo, hi = cyclic_block(worker_id, self.num_threads, S * A)
        # a fresh stream per (seed, segment, worker); numba's RNG state is per thread
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.segments,))
        seed = seq.spawn(self.num_threads)[worker_id].generate_state(1)[0]
        selector = ("uniform", "cyclic", "trajectory").index(self.selector)
        sh = self.shared
        sched = self.schedule
        common = (self._wstate[worker_id], self._wstats[worker_id], self.last_update,
                  self.record_commits, self._log_cursor) + self._log
        if self.kind == AQL:
            K.aql_worker(sampler.params, sampler.draw, sh.v, sh.pi, sh.q, sh.lock_words,
                         sh.counter, until, seed, selector, lo, hi, S, A,
                         sched.code, sched.value, sched.exponent, sched.bound, self.gamma,
                         *common)
        else:
            K.qvi_worker(sampler.params, sampler.draw_mean, sh.v, sh.pi, sh.lock_words,
                         sh.counter, until, seed, selector, lo, hi, S, A, self.copy_period,
                         sched.code, sched.value, sched.exponent, sched.bound,
                         self.correction, self.gamma, *common)

    # -- results --------------------------------------------------------------------

    def stats(self):
        if self.backend == "python":
            ws = self._workers
            accepted = sum(w.accepted for w in ws)
            rejected = sum(w.rejected for w in ws)
            samples = sum(w.samples for w in ws)
            max_gap = max(w.max_gap for w in ws)
            max_age = max(w.max_age for w in ws)
            log = None
            if self.shared.log is not None:
                cols = list(zip(*self.shared.log)) or [(), (), (), ()]
                log = CommitLog(np.array(cols[0], np.int64), np.array(cols[1], np.int64),
                                np.array(cols[2], np.int64), np.array(cols[3], np.float64))
        else:
            st = self._wstats.sum(axis=0)
            accepted, rejected = int(st[K.STAT_ACCEPTED]), int(st[K.STAT_REJECTED])
            samples = int(st[K.STAT_SAMPLES])
            max_gap = int(self._wstats[:, K.STAT_MAX_GAP].max())
            max_age = int(self._wstats[:, K.STAT_MAX_AGE].max())
            log = None
            if self.record_commits:
                n = int(self._log_cursor[0])
                log = CommitLog(*(arr[:n].copy() for arr in self._log))
        return AsyncRunStats(
            iterations_done=self.shared.t, wall_time=self.wall_time,
            last_update=self.last_update.copy(), observed_b1=max(1, max_gap),
            observed_b2=max_age + 1, updates_accepted=accepted, updates_rejected=rejected,
            samples_drawn=samples, commit_log=log,
            extra={"backend": self.backend, "segments": self.segments})
