"""Compiled loops against the readable reference loops, seeding, estimators."""
import dataclasses

import numpy as np
import pytest
from sklearn.base import clone

from legible_marl.estimators import LegibleMazeEstimator, LegibleNavEstimator
from legible_marl.learners import LearnerConfig
from legible_marl.maze_training import (MazeFastTrainer, MazeRunSettings, run_maze_bypass,
                                        run_maze_reference)
from legible_marl.nav_training import NavFastTrainer, NavRunSettings, run_nav_reference
from legible_marl.seeding import stream


def _rows(rows):
    return [dataclasses.astuple(r) for r in rows]


@pytest.mark.parametrize("algo,div,beta", [("q_learning", "reverse_kl", 0.1),
                                            ("sarsa", "reverse_kl", 0.5),
                                            ("q_learning", "smoothed_forward_kl", 0.1)])
def test_maze_kernel_matches_reference(algo, div, beta):
    st = MazeRunSettings(episodes=60, beta=beta, seed=3, algo=algo, divergence=div)
    ref, state = run_maze_reference(st)
    tr = MazeFastTrainer(st)
    fast = tr.metric_rows(tr.run(), 0)
    assert _rows(ref) == _rows(fast)
    for name in ("leader", "follower"):
        ref_t, fast_t = state[name], tr.tables()[name]
        for k in ref_t.keys():
            assert np.array_equal(ref_t.row(k), fast_t.row(k))


def test_maze_public_target_kernel_matches_reference():
    st = MazeRunSettings(episodes=40, beta=0.1, seed=2, public_target=True)
    ref, _ = run_maze_reference(st)
    tr = MazeFastTrainer(st)
    assert _rows(ref) == _rows(tr.metric_rows(tr.run(), 0))


def test_bypass_matches_unshaped_kernel():
    st = MazeRunSettings(episodes=60, beta=0.0, seed=4, algo="sarsa")
    rows, _, traces = run_maze_bypass(st)
    tr = MazeFastTrainer(st, shaping=False)
    out, traj = tr.run(record_actions=True)
    assert _rows(rows) == _rows(tr.metric_rows(out, 0))
    for ep, acts in enumerate(traces):
        assert [tuple(a) for a in traj[ep, :len(acts)]] == acts


def test_nav_kernel_matches_reference():
    st = NavRunSettings(episodes=6, beta=0.2, seed=5)
    ref, _ = run_nav_reference(st)
    tr = NavFastTrainer(st)
    assert _rows(ref) == _rows(tr.metric_rows(tr.run(), 0))


def test_chunked_run_equals_single_run():
    st = MazeRunSettings(episodes=300, beta=0.1, seed=1)
    a = MazeFastTrainer(st).run()
    t = MazeFastTrainer(st)
    b = np.vstack([t.run(100), t.run(150), t.run(1000)])
    assert np.array_equal(a, b) and t.done


def test_beta_zero_shaped_equals_raw():
    out = MazeFastTrainer(MazeRunSettings(episodes=200, beta=0.0, seed=1)).run()
    assert np.array_equal(out[:, 0], out[:, 1])


def test_streams_are_independent_and_stable():
    a = stream(1, "leader").random(5)
    assert np.array_equal(a, stream(1, "leader").random(5))
    assert not np.array_equal(a, stream(1, "follower").random(5))
    assert not np.array_equal(a, stream(2, "leader").random(5))


def test_goal_sequence_does_not_depend_on_beta():
    goals = [MazeFastTrainer(MazeRunSettings(episodes=200, beta=b, seed=7)).run()[:, 6]
             for b in (0.0, 0.1, 1.0)]
    assert np.array_equal(goals[0], goals[1]) and np.array_equal(goals[0], goals[2])


def test_repeat_runs_are_identical():
    st = MazeRunSettings(episodes=500, beta=0.1, seed=9)
    assert np.array_equal(MazeFastTrainer(st).run(), MazeFastTrainer(st).run())


def test_estimator_params_and_clone():
    base = LegibleMazeEstimator(episodes=200, alpha=0.5)
    est = clone(base).set_params(beta=0.1, seed=4)
    assert est.get_params()["beta"] == 0.1 and base.beta == 0.0
    assert est.settings().learner == LearnerConfig(alpha=0.5)
    nav = clone(LegibleNavEstimator(episodes=3, physics={"max_steps": 20}))
    assert nav.settings().max_steps == 20


def test_estimator_fit_predict_score():
    est = LegibleMazeEstimator(episodes=300, seed=2).fit()
    assert est.finished_ and est.history_.shape == (300, 7) and len(est.rows_) == 300
    assert est.score() == pytest.approx(est.history_[-30:, 0].mean())
    a = est.predict([[7, 4, 8, 4, 0], [7, 4, 8, 4, 3]])
    assert a.shape == (2,) and set(a) <= set(range(5))
    with pytest.raises(ValueError):
        LegibleMazeEstimator().score()


def test_partial_fit_matches_fit():
    a = LegibleMazeEstimator(episodes=200, seed=3, beta=0.1).fit()
    b = LegibleMazeEstimator(episodes=200, seed=3, beta=0.1)
    while not (hasattr(b, "trainer_") and b.finished_):
        b.partial_fit(n_episodes=70)
    assert np.array_equal(a.history_, b.history_)


def test_nav_estimator_predict():
    est = LegibleNavEstimator(episodes=3, seed=1).fit()
    out = est.predict(np.zeros((4, 4)), agent=2)
    assert out.shape == (4,)
