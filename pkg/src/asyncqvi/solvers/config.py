from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .._validation import check_delta, check_epsilon, check_gamma, check_positive_int
from ..theory import AsynchronismBound, iteration_bound_L, sample_bound_K

SELECTORS = ("uniform", "cyclic", "trajectory")
TRAJECTORY_RESTART = 200

_CONSTANT, _ADAPTIVE_SAMPLES, _ADAPTIVE_STEPSIZE, _DIMINISHING_STEPSIZE = range(4)


@njit(cache=True, nogil=True)
def _evaluate(code, value, exponent, bound, t):
    if code == _CONSTANT:
        return value
    if code == _ADAPTIVE_SAMPLES:
        return max(1.0, min(np.floor(t ** exponent), bound))
    if code == _ADAPTIVE_STEPSIZE:
        return max(t ** -exponent, bound)
    return t ** -exponent


@dataclass(frozen=True)
class ScheduleSpec:
    """Per-iteration sample count K_t or stepsize alpha_t.

    Use the named constructors; ``t`` is the 1-based global iteration number.
    """
    kind: str          # "samples" or "stepsize"
    mode: str          # "constant", "adaptive" or "diminishing"
    value: float = 1.0
    exponent: float = 0.0
    bound: float = 0.0

    def __post_init__(self):
        if self.kind not in ("samples", "stepsize"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        allowed = ("constant", "adaptive") + (("diminishing",) if self.kind == "stepsize" else ())
        if self.mode not in allowed:
            raise ValueError(f"mode must be one of {allowed}, got {self.mode!r}")
        if self.mode == "constant":
            if self.kind == "samples" and (self.value < 1 or self.value != int(self.value)):
                raise ValueError(f"constant K must be a positive integer, got {self.value}")
            if self.kind == "stepsize" and not 0 < self.value <= 1:
                raise ValueError(f"constant alpha must lie in (0, 1], got {self.value}")

    @classmethod
    def constant_samples(cls, K):
        return cls("samples", "constant", float(K))

    @classmethod
    def adaptive_samples(cls, exponent=0.175, cap=35):
        """K_t = min(floor(t**exponent), cap), never below one."""
        return cls("samples", "adaptive", exponent=exponent, bound=float(cap))

    @classmethod
    def constant_stepsize(cls, alpha):
        return cls("stepsize", "constant", float(alpha))

    @classmethod
    def adaptive_stepsize(cls, exponent=0.1, floor=0.1):
        """alpha_t = max(t**-exponent, floor)."""
        return cls("stepsize", "adaptive", exponent=exponent, bound=floor)

    @classmethod
    def diminishing_stepsize(cls, exponent=0.51):
        """alpha_t = 1 / t**exponent."""
        return cls("stepsize", "diminishing", exponent=exponent)

    @property
    def code(self):
        if self.mode == "constant":
            return _CONSTANT
        if self.mode == "diminishing":
            return _DIMINISHING_STEPSIZE
        return _ADAPTIVE_SAMPLES if self.kind == "samples" else _ADAPTIVE_STEPSIZE


def schedule_value(spec, t):
    """Evaluate a schedule at 1-based iteration ``t`` (int for K, float for alpha)."""
    if t < 1:
        raise ValueError(f"iterations are counted from 1, got {t}")
    out = _evaluate(spec.code, spec.value, spec.exponent, spec.bound, float(t))
    return int(out) if spec.kind == "samples" else float(out)


def iterations_for_sample_budget(spec, budget):
    """Smallest L whose cumulative K_1 + ... + K_L reaches ``budget``."""
    if spec.kind != "samples":
        raise ValueError("only sample schedules consume a sample budget")
    if spec.mode == "constant":
        return int(-(-budget // int(spec.value)))
    total, t = 0, 0
    step = 1 << 16
    while total < budget:
        ts = np.arange(t + 1, t + step + 1, dtype=np.float64)
        ks = np.clip(np.floor(ts ** spec.exponent), 1, spec.bound)
        cum = total + np.cumsum(ks)
        hit = np.searchsorted(cum, budget)
        if hit < step:
            return int(t + hit + 1)
        total, t = int(cum[-1]), t + step
    return t


@dataclass
class SolverConfig:
    """Run parameters shared by AsyncQVI and the asynchronous Q-learning baselines.

    ``L`` and ``K`` of zero are filled in from the theoretical budgets, using the
    update-gap proxy ``|S||A|`` and staleness proxy ``num_threads + copy_period``.
    """
    epsilon: float = 0.1
    delta: float = 0.1
    gamma: float = 0.99
    num_threads: int = 1
    L: int = 0
    K: int = 0
    selector: str = "uniform"
    schedule: ScheduleSpec = None
    copy_period: int = 1
    seed: int = 0

    def __post_init__(self):
        self.gamma = check_gamma(self.gamma)
        self.epsilon = check_epsilon(self.epsilon, self.gamma)
        self.delta = check_delta(self.delta)
        self.num_threads = check_positive_int(self.num_threads, "num_threads")
        self.L = check_positive_int(self.L, "L", minimum=0)
        self.K = check_positive_int(self.K, "K", minimum=0)
        self.copy_period = check_positive_int(self.copy_period, "copy_period")
        if self.selector not in SELECTORS:
            raise ValueError(f"selector must be one of {SELECTORS}, got {self.selector!r}")
        if self.schedule is not None and self.schedule.kind != "samples":
            raise ValueError("SolverConfig.schedule must be a sample-count schedule")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def asynchronism_proxy(self, num_states, num_actions):
        return AsynchronismBound(num_states * num_actions, self.num_threads + self.copy_period)

    def resolve(self, num_states, num_actions):
        """Return ``(L, schedule)`` with theorem defaults substituted for zeros."""
        L = self.L or iteration_bound_L(self.epsilon, self.gamma,
                                        self.asynchronism_proxy(num_states, num_actions))
        if self.schedule is not None:
            return L, self.schedule
        K = self.K or sample_bound_K(self.epsilon, self.gamma, self.delta, L)
        return L, ScheduleSpec.constant_samples(K)


@dataclass
class CommitLog:
    """Accepted commits in per-state commit order."""
    iteration: np.ndarray
    state: np.ndarray
    action: np.ndarray
    value: np.ndarray

    def __len__(self):
        return len(self.iteration)


@dataclass
class AsyncRunStats:
    iterations_done: int
    wall_time: float
    last_update: np.ndarray          # last iteration each (state, action) pair was selected
    observed_b1: int
    observed_b2: int
    updates_accepted: int
    updates_rejected: int
    samples_drawn: int
    commit_log: CommitLog = None
    extra: dict = field(default_factory=dict)

    @property
    def observed_bound(self):
        return AsynchronismBound(max(1, self.observed_b1), max(1, self.observed_b2))

    @property
    def iterations_per_second(self):
        return self.iterations_done / self.wall_time if self.wall_time > 0 else float("inf")

    @property
    def samples_per_second(self):
        return self.samples_drawn / self.wall_time if self.wall_time > 0 else float("inf")
