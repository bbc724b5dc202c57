"""Randomised invariants (run with ``-m properties``)."""
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from legible_marl.belief import (ReverseKL, SmoothedForwardKL, aggregate_self_belief,
                                 divergence_to_goal, kl_gain)
from legible_marl.envs.maze import MazeMap, maze_reset, maze_step
from legible_marl.envs.particle import CANONICAL_OBSTACLES, ParticleConfig, integrate
from legible_marl.harness.criteria import exact_posterior
from legible_marl.learners import QTable, LearnerConfig, q_update
from legible_marl.legibility import shape_reward
from legible_marl.maze_training import MazeFastTrainer, MazeRunSettings
from legible_marl.metrics import EpisodeRecord, pcr, prediction_correct, ptr
from legible_marl.recognition import EmpiricalPolicyModel, bayes_update

from test_legibility import _run, _setup

pytestmark = pytest.mark.properties

LAYOUT = MazeMap.load()
MODES = st.sampled_from([ReverseKL(), SmoothedForwardKL(1e-6), SmoothedForwardKL(1e-3)])


@st.composite
def distributions(draw, n=None, min_mass=0.0):
    n = draw(st.integers(2, 6)) if n is None else n
    w = draw(arrays(float, n, elements=st.floats(min_mass, 1.0)))
    assume(w.sum() > 1e-6)
    return w / w.sum()


@st.composite
def belief_paths(draw):
    n = draw(st.integers(2, 6))
    T = draw(st.integers(1, 12))
    return n, [draw(distributions(n)) for _ in range(T + 1)]


def _valid(p):
    p = np.asarray(p)
    return abs(p.sum() - 1.0) <= 1e-9 and np.all(p >= 0)


@given(st.integers(2, 6), st.data())
def test_bayes_output_on_simplex_and_matches_rationals(n, data):
    prior, lik = data.draw(distributions(n)), data.draw(distributions(n))
    post, degenerate = bayes_update(prior, lik, return_flag=True)
    assert _valid(post)
    assert degenerate == (float(np.dot(prior, lik)) < 1e-300)
    exact = exact_posterior(prior, lik)
    assert np.allclose(np.asarray(post), [float(x) for x in exact], atol=1e-9)


@given(st.lists(distributions(4), min_size=1, max_size=5))
def test_aggregation_on_simplex_and_equal_weights_mean(parts):
    agg = aggregate_self_belief(parts)
    assert _valid(agg)
    assert np.allclose(np.asarray(agg), np.mean(parts, axis=0), atol=1e-12)


@given(distributions(4), distributions(4), st.integers(0, 3), MODES)
def test_kl_gain_antisymmetric(a, b, g, mode):
    assert kl_gain(a, b, g, mode) == -kl_gain(b, a, g, mode)


@given(st.integers(2, 6), st.data(), MODES)
def test_divergence_decreases_as_true_goal_gains_mass(n, data, mode):
    g = data.draw(st.integers(0, n - 1))
    rest = data.draw(distributions(n - 1, min_mass=0.01))
    lo, hi = sorted(data.draw(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2,
                                       unique=True)))
    assume(hi - lo > 1e-6)

    def belief(m):
        return np.insert((1 - m) * rest, g, m)
    eps = getattr(mode, "eps_smooth", 0.0)
    assume(eps < 0.5 / n)
    if isinstance(mode, SmoothedForwardKL):
        # forward KL is minimised at the smoothed target, so compare above it
        assume(hi <= 1 - eps * (n - 1) - 1e-6)
    assert divergence_to_goal(belief(lo), g, mode) > divergence_to_goal(belief(hi), g, mode)


@given(belief_paths(), st.data(), MODES)
def test_klg_telescopes(path, data, mode):
    n, bs = path
    assume(getattr(mode, "eps_smooth", 0.0) < 0.5 / n)
    g = data.draw(st.integers(0, n - 1))
    total = sum(kl_gain(bs[t - 1], bs[t], g, mode) for t in range(1, len(bs)))
    expect = divergence_to_goal(bs[0], g, mode) - divergence_to_goal(bs[-1], g, mode)
    assert abs(total - expect) <= 1e-9


@given(st.lists(st.integers(0, 2), min_size=1, max_size=10), st.floats(0.0, 5.0), MODES)
def test_shaped_minus_raw_is_beta_times_klg_sum(script, beta, mode):
    world, agents, recs, ests, cfg = _setup(beta, script=tuple(script), mode=mode,
                                            horizon=len(script))
    outs = _run(world, agents, recs, ests, cfg)
    trs = [t for o in outs for t in o.transitions]
    assert len(trs) == 2 * len(script)
    diff = sum(t.reward_shaped - t.reward_raw for t in trs)
    assert abs(diff - beta * sum(t.klg for t in trs)) <= 1e-9


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10), st.floats(1e-3, 10))
def test_shaping_strictly_monotone_in_klg(raw, k1, k2, beta):
    assume(abs(k1 - k2) > 1e-6)
    lo, hi = sorted((k1, k2))
    assert shape_reward(raw, lo, beta) < shape_reward(raw, hi, beta)


@given(st.lists(st.tuples(st.integers(0, 20), st.integers(0, 3), st.integers(0, 4)),
                max_size=40), st.randoms())
def test_empirical_counts_commute(obs, rnd):
    a, b = EmpiricalPolicyModel(4, 5), EmpiricalPolicyModel(4, 5)
    for k, g, u in obs:
        a.observe(k, g, u)
    shuffled = list(obs)
    rnd.shuffle(shuffled)
    for k, g, u in shuffled:
        b.observe(k, g, u)
    for k, _, u in obs:
        assert np.array_equal(a.likelihood(k, u), b.likelihood(k, u))


@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=1, max_size=60),
       st.integers(0, 3))
def test_maze_positions_stay_on_free_cells(actions, target):
    w = maze_reset(target="ABCD"[target], layout=LAYOUT)
    for joint in actions:
        w2, _, done = maze_step(w, joint)
        w3, _, _ = maze_step(w, joint)
        assert w2 == w3
        for x, y in (w2.leader_pos, w2.follower_pos):
            assert 0 <= x < 16 and 0 <= y < 10 and LAYOUT.is_free((x, y))
        assert w2.step_count <= w2.max_steps
        if w2.success:
            exit_xy = LAYOUT.exits[w2.target_exit]
            assert w2.leader_pos == exit_xy and w2.follower_pos == exit_xy
        w = w2
        if done:
            break


vec2 = st.tuples(st.floats(-3, 3), st.floats(-3, 3))


@given(st.lists(vec2, min_size=3, max_size=3), st.lists(vec2, min_size=3, max_size=3),
       st.lists(vec2, min_size=3, max_size=3), st.floats(0.1, 2.0))
def test_particle_speed_clamp(pos, vel, force, max_speed):
    phys = ParticleConfig(max_speed=max_speed).physics()
    p = np.clip(np.array(pos, dtype=float), -0.9, 0.9)
    v = np.array(vel, dtype=float)
    integrate(p, v, np.array(force, dtype=float), np.asarray(CANONICAL_OBSTACLES), phys)
    assert np.all(np.hypot(v[:, 0], v[:, 1]) <= max_speed * (1 + 1e-12))


@given(st.lists(vec2, min_size=3, max_size=3), st.lists(vec2, min_size=3, max_size=3),
       st.floats(0.01, 0.9))
def test_particle_energy_never_grows_without_force(pos, vel, damping):
    phys = ParticleConfig(damping=damping, max_speed=10.0).physics()
    p = np.clip(np.array(pos, dtype=float), -0.9, 0.9)
    v = np.array(vel, dtype=float)
    before = np.hypot(v[:, 0], v[:, 1])
    integrate(p, v, np.zeros((3, 2)), np.asarray(CANONICAL_OBSTACLES), phys)
    assert np.all(np.hypot(v[:, 0], v[:, 1]) <= before + 1e-12)


@given(st.integers(2, 6), st.integers(1, 20), st.data())
def test_ptr_bounds_and_wrong_final_means_one(n, T, data):
    bs = np.array([data.draw(distributions(n)) for _ in range(T + 1)])
    g = data.draw(st.integers(0, n - 1))
    rec = EpisodeRecord(bs, g)
    v = ptr(rec)
    assert 0.0 <= v <= 1.0
    if not prediction_correct(rec):
        assert v == 1.0


@given(st.lists(st.booleans(), min_size=2, max_size=300), st.data())
def test_pcr_composes_over_disjoint_windows(flags, data):
    cut = data.draw(st.integers(1, len(flags) - 1))
    a, b = flags[:cut], flags[cut:]
    whole = (len(a) * pcr(a) + len(b) * pcr(b)) / len(flags)
    assert abs(whole - pcr(flags)) <= 1e-12


@given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 4), st.floats(-1, 1)),
                max_size=30, unique_by=lambda t: t[0]), st.randoms())
def test_distinct_key_updates_commute(batch, rnd):
    cfg = LearnerConfig()
    a, b = QTable(5), QTable(5)
    for k, u, r in batch:
        q_update(a, k, u, r, None, True, cfg)
    rnd.shuffle(batch)
    for k, u, r in batch:
        q_update(b, k, u, r, None, True, cfg)
    for k, _, _ in batch:
        assert np.array_equal(a.row(k), b.row(k))


@given(st.integers(0, 2**31), st.sampled_from([0.01, 0.1, 1.0]))
def test_maze_bonus_never_exceeds_initial_divergence(seed, beta):
    out = MazeFastTrainer(MazeRunSettings(episodes=30, beta=beta, seed=seed)).run()
    bonus = (out[:, 1] - out[:, 0]) / beta
    assert np.all(bonus <= math.log(4) + 1e-9)
    assert np.all(bonus >= math.log(4) + math.log(1e-12) - 1e-9)
