"""Stochastic sailing benchmark on a square grid.

A state is a grid position plus one of eight compass wind directions; an action is one
of the same eight directions. Directions are indexed clockwise from north, so the
angle between two directions is 45 degrees times their circular index distance.

Dynamics: the sailor moves by the action's unit offset plus Gaussian drift on each axis
(standard deviation ``sigma1``; with probability ``vortex_p`` one vortex event widens
both axes to ``sqrt(sigma1**2 + sigma2**2)``), rounded to the nearest cell and clamped
to the grid. The wind then turns by k*45 degrees with the fixed probabilities in
:data:`WIND_SHIFT_PROBS`. Rewards depend on the current state: 1 on the target (which
is absorbing), otherwise ``d * angle(wind, action) / 45``.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit
from scipy.special import ndtr

from .mdp import CompiledSampler, TabularMdp

NUM_DIRECTIONS = 8
# clockwise from north: N, NE, E, SE, S, SW, W, NW
DIRECTION_OFFSETS = np.array([(0, 1), (1, 1), (1, 0), (1, -1),
                              (0, -1), (-1, -1), (-1, 0), (-1, 1)], dtype=np.int64)
# probability that the wind turns by k * 45 degrees clockwise, k = 0..7
WIND_SHIFT_PROBS = np.array([0.3, 0.2, 0.1, 0.04, 0.02, 0.04, 0.1, 0.2])

MAX_TABULAR_STATES = 20000
MAX_TABULAR_NNZ = 60_000_000


@dataclass(frozen=True)
class SailingConfig:
    grid_size: int = 100
    d: float = 0.05
    sigma1: float = 0.5
    sigma2: float = 2.0
    vortex_p: float = 0.05
    target: tuple = None

    def __post_init__(self):
        if self.target is None:
            object.__setattr__(self, "target", (self.grid_size // 2, self.grid_size // 2))
        object.__setattr__(self, "target", tuple(int(c) for c in self.target))
        if self.grid_size < 2:
            raise ValueError(f"grid_size must be >= 2, got {self.grid_size}")
        if not 0 <= self.d <= 0.25:
            raise ValueError(f"d must lie in [0, 0.25] so rewards stay in [0, 1], got {self.d}")
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValueError("noise standard deviations must be nonnegative")
        if not 0 <= self.vortex_p <= 1:
            raise ValueError(f"vortex_p must lie in [0, 1], got {self.vortex_p}")
        if not all(0 <= c < self.grid_size for c in self.target):
            raise ValueError(f"target {self.target} lies outside the grid")

    @property
    def num_states(self):
        return self.grid_size * self.grid_size * NUM_DIRECTIONS

    @property
    def vortex_sigma(self):
        return math.hypot(self.sigma1, self.sigma2)


class SailingState(NamedTuple):
    x: int
    y: int
    wind: int


def sailing_encode(state, cfg):
    x, y, wind = state
    G = cfg.grid_size
    if not (0 <= x < G and 0 <= y < G and 0 <= wind < NUM_DIRECTIONS):
        raise ValueError(f"{state} is outside a {G}x{G} grid")
    return (x * G + y) * NUM_DIRECTIONS + wind


def sailing_decode(index, cfg):
    if not 0 <= index < cfg.num_states:
        raise ValueError(f"state id {index} outside [0, {cfg.num_states})")
    cell, wind = divmod(int(index), NUM_DIRECTIONS)
    x, y = divmod(cell, cfg.grid_size)
    return SailingState(x, y, wind)


def angle_steps(wind, action):
    """Minimal circular distance between two directions, in units of 45 degrees."""
    diff = abs(int(wind) - int(action)) % NUM_DIRECTIONS
    return min(diff, NUM_DIRECTIONS - diff)


def sailing_reward(wind, action, cfg, at_target):
    if at_target:
        return 1.0
    return cfg.d * angle_steps(wind, action)


def _next_winds(wind, size, rng):
    shift = np.searchsorted(np.cumsum(WIND_SHIFT_PROBS), rng.random(size), side="right")
    return (wind + np.minimum(shift, NUM_DIRECTIONS - 1)) % NUM_DIRECTIONS


def _sample_batch(state, action, cfg, size, rng):
    """Draw ``size`` independent transitions; returns (xs, ys, winds, reward)."""
    x, y, wind = state
    tx, ty = cfg.target
    if x == tx and y == ty:
        return np.full(size, tx), np.full(size, ty), _next_winds(wind, size, rng), 1.0
    vortex = rng.random(size) < cfg.vortex_p
    sd = np.where(vortex, cfg.vortex_sigma, cfg.sigma1)
    dx, dy = DIRECTION_OFFSETS[action]
    G = cfg.grid_size
    xs = np.clip(np.floor(x + dx + sd * rng.standard_normal(size) + 0.5), 0, G - 1)
    ys = np.clip(np.floor(y + dy + sd * rng.standard_normal(size) + 0.5), 0, G - 1)
    reward = cfg.d * angle_steps(wind, action)
    return xs.astype(np.int64), ys.astype(np.int64), _next_winds(wind, size, rng), reward


def sailing_sample(state, action, cfg, rng):
    """One generative-model draw from ``state`` under ``action``."""
    xs, ys, winds, reward = _sample_batch(state, action, cfg, 1, rng)
    return SailingState(int(xs[0]), int(ys[0]), int(winds[0])), reward


class SailingModel:
    """The sailing problem as a generative model over encoded states."""

    def __init__(self, cfg=None):
        self.cfg = cfg or SailingConfig()
        self.num_states = self.cfg.num_states
        self.num_actions = NUM_DIRECTIONS
        tx, ty = self.cfg.target
        base = (tx * self.cfg.grid_size + ty) * NUM_DIRECTIONS
        self.target_states = np.arange(base, base + NUM_DIRECTIONS, dtype=np.int64)

    def sample(self, state, action, rng):
        nxt, reward = sailing_sample(sailing_decode(state, self.cfg), action, self.cfg, rng)
        return sailing_encode(nxt, self.cfg), reward

    def sample_mean(self, state, action, K, values, rng):
        xs, ys, winds, reward = _sample_batch(sailing_decode(state, self.cfg), action,
                                              self.cfg, K, rng)
        js = (xs * self.cfg.grid_size + ys) * NUM_DIRECTIONS + winds
        return reward, float(values[js].mean()), int(js[-1])

    def is_target(self, state):
        return (int(state) // NUM_DIRECTIONS) == (self.target_states[0] // NUM_DIRECTIONS)

    @property
    def compiled(self):
        c = self.cfg
        params = (np.int64(c.grid_size), np.int64(c.target[0]), np.int64(c.target[1]),
                  float(c.d), float(c.sigma1), float(c.vortex_sigma), float(c.vortex_p),
                  np.cumsum(WIND_SHIFT_PROBS), DIRECTION_OFFSETS.copy())
        return CompiledSampler(params, sailing_draw, sailing_draw_mean)


@njit(nogil=True, cache=True)
def _sailing_step(params, i, a):
    G, tx, ty, d, sigma1, sigma_v, p, wind_cum, offsets = params
    cell = i // 8
    wind = i % 8
    x = cell // G
    y = cell % G
    u = np.random.random()
    shift = 0
    while shift < 7 and u >= wind_cum[shift]:
        shift += 1
    nwind = (wind + shift) % 8
    if x == tx and y == ty:
        return (x * G + y) * 8 + nwind, 1.0
    sd = sigma_v if np.random.random() < p else sigma1
    nx = int(np.floor(x + offsets[a, 0] + sd * np.random.standard_normal() + 0.5))
    ny = int(np.floor(y + offsets[a, 1] + sd * np.random.standard_normal() + 0.5))
    nx = min(max(nx, 0), G - 1)
    ny = min(max(ny, 0), G - 1)
    diff = abs(wind - a) % 8
    steps = min(diff, 8 - diff)
    return (nx * G + ny) * 8 + nwind, d * steps


@njit(nogil=True, cache=True)
def sailing_draw(params, i, a):
    return _sailing_step(params, i, a)


@njit(nogil=True, cache=True)
def sailing_draw_mean(params, i, a, K, values):
    tot_r = 0.0
    tot_v = 0.0
    j = -1
    for _ in range(K):
        j, r = _sailing_step(params, i, a)
        tot_r += r
        tot_v += values[j]
    return tot_r / K, tot_v / K, j


def _axis_masses(mu, sd, G):
    """Probability that round(mu + sd*Z), clamped to [0, G-1], lands in each cell."""
    if sd == 0:
        out = np.zeros(G)
        out[min(max(int(mu), 0), G - 1)] = 1.0
        return out
    edges = (np.arange(1, G) - 0.5 - mu) / sd
    cdf = np.concatenate([[0.0], ndtr(edges), [1.0]])
    return np.diff(cdf)


def sailing_tabularize(cfg, gamma=0.99, tol=1e-12):
    """Exact transition table of the sailing model.

    Cells whose position mass falls below ``tol`` are dropped and each position
    distribution renormalized, so every row sums to one to rounding error.
    """
    G = cfg.grid_size
    if cfg.num_states > MAX_TABULAR_STATES:
        raise ValueError(f"{cfg.num_states} states exceed the tabular guard of "
                         f"{MAX_TABULAR_STATES}; use the generative model instead")
    A = NUM_DIRECTIONS
    tx, ty = cfg.target
    mild = {m: _axis_masses(m, cfg.sigma1, G) for m in range(-1, G + 1)}
    wide = {m: _axis_masses(m, cfg.vortex_sigma, G) for m in range(-1, G + 1)}

    position_rows = {}
    nnz = 0
    for x in range(G):
        for y in range(G):
            for a in range(A):
                dx, dy = DIRECTION_OFFSETS[a]
                mass = (1 - cfg.vortex_p) * np.outer(mild[x + dx], mild[y + dy])
                if cfg.vortex_p > 0:
                    mass += cfg.vortex_p * np.outer(wide[x + dx], wide[y + dy])
                cells = np.flatnonzero(mass >= tol)
                pm = mass.ravel()[cells]
                position_rows[x, y, a] = (cells, pm / pm.sum())
                nnz += len(cells) * A * A
    if nnz > MAX_TABULAR_NNZ:
        raise ValueError(f"tabularized model would hold {nnz} transitions "
                         f"(guard {MAX_TABULAR_NNZ}); reduce grid_size or noise")

    shift = np.arange(A)
    counts = np.empty(cfg.num_states * A, dtype=np.int64)
    chunks_j, chunks_p, chunks_r = [], [], []
    k = 0
    for x in range(G):
        for y in range(G):
            at_target = x == tx and y == ty
            for w in range(A):
                next_w = (w + shift) % A
                for a in range(A):
                    if at_target:
                        cells, pm = np.array([x * G + y]), np.array([1.0])
                        r = 1.0
                    else:
                        cells, pm = position_rows[x, y, a]
                        r = cfg.d * angle_steps(w, a)
                    js = (cells[:, None] * A + next_w[None, :]).ravel()
                    ps = (pm[:, None] * WIND_SHIFT_PROBS[None, :]).ravel()
                    order = np.argsort(js, kind="stable")
                    chunks_j.append(js[order])
                    chunks_p.append(ps[order])
                    chunks_r.append(np.full(len(js), r))
                    counts[k] = len(js)
                    k += 1
    indptr = np.concatenate([[0], np.cumsum(counts)])
    return TabularMdp(cfg.num_states, A, indptr, np.concatenate(chunks_j),
                      np.concatenate(chunks_p), np.concatenate(chunks_r), gamma)
