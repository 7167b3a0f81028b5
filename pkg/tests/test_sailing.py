import numpy as np
import pytest
from numba import njit

from asyncqvi import SailingConfig, SailingModel, SailingState, sailing_tabularize, validate_mdp
from asyncqvi.sailing import (_next_winds, _sample_batch, sailing_decode, sailing_draw,
                              sailing_encode, sailing_reward, sailing_sample)


def test_encode_examples():
    cfg = SailingConfig(grid_size=100)
    assert sailing_encode(SailingState(0, 0, 0), cfg) == 0
    assert sailing_encode(SailingState(99, 99, 7), cfg) == 79999
    assert cfg.num_states == 80000


@pytest.mark.parametrize("G", [2, 7, 30])
def test_encode_decode_bijection(G):
    cfg = SailingConfig(grid_size=G)
    ids = [sailing_encode(sailing_decode(k, cfg), cfg) for k in range(cfg.num_states)]
    assert ids == list(range(cfg.num_states))


def test_encode_rejects_out_of_range():
    cfg = SailingConfig(grid_size=5)
    with pytest.raises(ValueError):
        sailing_decode(200, cfg)
    with pytest.raises(ValueError):
        sailing_encode(SailingState(5, 0, 0), cfg)


def test_rewards():
    cfg = SailingConfig(d=0.15)
    assert sailing_reward(3, 3, cfg, False) == 0.0
    assert sailing_reward(1, 5, cfg, False) == pytest.approx(0.6)
    assert sailing_reward(0, 7, cfg, False) == pytest.approx(0.15)
    assert sailing_reward(2, 6, cfg, True) == 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        SailingConfig(grid_size=1)
    with pytest.raises(ValueError):
        SailingConfig(d=0.3)
    with pytest.raises(ValueError):
        SailingConfig(grid_size=10, target=(10, 3))
    assert SailingConfig(grid_size=20).target == (10, 10)


def test_wind_frequencies():
    n = 10 ** 6
    winds = _next_winds(3, n, np.random.default_rng(0))
    freq = np.bincount((winds - 3) % 8, minlength=8) / n
    # by clockwise shift: same, +45, +90, +135, 180, -135, -90, -45
    p = np.array([0.3, 0.2, 0.1, 0.04, 0.02, 0.04, 0.1, 0.2])
    assert np.all(np.abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / n))


def test_noiseless_motion_is_clamped_step():
    cfg = SailingConfig(grid_size=6, sigma1=0, sigma2=0, vortex_p=0, target=(0, 0))
    rng = np.random.default_rng(1)
    offsets = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)]
    for x, y in [(2, 3), (5, 5), (0, 5), (5, 0)]:
        for a, (dx, dy) in enumerate(offsets):
            nxt, _ = sailing_sample(SailingState(x, y, 2), a, cfg, rng)
            assert (nxt.x, nxt.y) == (min(max(x + dx, 0), 5), min(max(y + dy, 0), 5))


def test_target_is_absorbing_with_unit_reward():
    cfg = SailingConfig(grid_size=8)
    rng = np.random.default_rng(2)
    for a in range(8):
        nxt, r = sailing_sample(SailingState(4, 4, 1), a, cfg, rng)
        assert (nxt.x, nxt.y, r) == (4, 4, 1.0)


def test_reward_uses_current_state():
    cfg = SailingConfig(grid_size=8, d=0.1)
    _, _, _, r = _sample_batch(SailingState(4, 3, 0), 4, cfg, 5, np.random.default_rng(0))
    assert r == pytest.approx(0.4)


def test_tabularize_noiseless_has_eight_outcomes():
    mdp = sailing_tabularize(SailingConfig(grid_size=4, sigma1=0, sigma2=0, vortex_p=0))
    assert np.all(np.diff(mdp.indptr) == 8)
    validate_mdp(mdp)


@pytest.mark.parametrize("cfg", [SailingConfig(grid_size=6),
                                 SailingConfig(grid_size=5, sigma1=1.2, sigma2=3.0,
                                               vortex_p=0.3, d=0.2)])
def test_tabularize_rows_sum_to_one(cfg):
    mdp = sailing_tabularize(cfg)
    rows = np.repeat(np.arange(len(mdp.indptr) - 1), np.diff(mdp.indptr))
    assert np.allclose(np.bincount(rows, weights=mdp.probs), 1.0, atol=1e-9)
    validate_mdp(mdp)


def test_tabularize_guard():
    with pytest.raises(ValueError, match="guard"):
        sailing_tabularize(SailingConfig(grid_size=60))


@njit
def _compiled_draws(params, i, a, n, seed):
    np.random.seed(seed)
    out = np.empty(n, np.int64)
    for k in range(n):
        out[k] = sailing_draw(params, i, a)[0]
    return out


@pytest.mark.parametrize("backend", ["numpy", "compiled"])
def test_sampler_matches_tabularized_row(backend):
    cfg = SailingConfig(grid_size=7, sigma1=0.7, sigma2=1.5, vortex_p=0.2, target=(6, 6))
    mdp = sailing_tabularize(cfg)
    gm = SailingModel(cfg)
    state, action, n = sailing_encode(SailingState(1, 5, 2), cfg), 1, 10 ** 5
    if backend == "numpy":
        xs, ys, winds, _ = _sample_batch(sailing_decode(state, cfg), action, cfg, n,
                                         np.random.default_rng(3))
        js = (xs * cfg.grid_size + ys) * 8 + winds
    else:
        js = _compiled_draws(gm.compiled.params, state, action, n, 3)
    freq = np.bincount(js, minlength=cfg.num_states) / n
    p = np.zeros(cfg.num_states)
    nxt, probs, _ = mdp.row(state, action)
    p[nxt] = probs
    # 4 standard errors per cell where n*p is large enough for the normal
    # approximation; the sparse tail is pooled into one cell
    big = p * n >= 5
    cells_f = np.append(freq[big], freq[~big].sum())
    cells_p = np.append(p[big], p[~big].sum())
    se = np.sqrt(cells_p * (1 - cells_p) / n)
    assert np.all(np.abs(cells_f - cells_p) <= 4 * se)
    assert set(np.flatnonzero(freq)) <= set(nxt.tolist())


def test_model_sample_mean_and_target():
    cfg = SailingConfig(grid_size=5, target=(2, 2))
    gm = SailingModel(cfg)
    assert gm.is_target(sailing_encode(SailingState(2, 2, 5), cfg))
    assert not gm.is_target(sailing_encode(SailingState(2, 1, 5), cfg))
    assert len(gm.target_states) == 8
    values = np.ones(cfg.num_states)
    r, v, j = gm.sample_mean(gm.target_states[0], 3, 10, values, np.random.default_rng(0))
    assert (r, v) == (1.0, 1.0) and gm.is_target(j)
