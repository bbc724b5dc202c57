import math

import mpmath
import numpy as np
import pytest

from legible_marl._validation import ConfigurationError
from legible_marl.belief import (GoalDistribution, GoalSet, OneHotGoal, ReverseKL,
                                 SmoothedForwardKL, aggregate_self_belief, concat_beliefs,
                                 divergence_mode, divergence_to_goal, kl_gain, uniform)

mpmath.mp.dps = 50
# arbitrary precision reference values, frozen
LN4 = float(mpmath.log(4))
LN2 = float(mpmath.log(2))


@pytest.mark.parametrize("n", [2, 4, 6])
def test_uniform(n):
    b = np.asarray(uniform(n))
    assert b.shape == (n,)
    assert np.all(b == 1.0 / n)
    assert abs(b.sum() - 1) < 1e-12


def test_uniform_from_goal_set():
    gs = GoalSet("ABCD")
    assert np.allclose(uniform(gs), 0.25)
    assert gs.index("C") == 2
    assert list(gs.one_hot("B").vector()) == [0, 1, 0, 0]


def test_goal_set_rejects_duplicates_and_singletons():
    with pytest.raises(ConfigurationError):
        GoalSet(["A", "A"])
    with pytest.raises(ConfigurationError):
        GoalSet(["A"])


def test_distribution_validation():
    with pytest.raises(ConfigurationError):
        GoalDistribution([0.5, 0.6])
    with pytest.raises(ConfigurationError):
        GoalDistribution([1.2, -0.2])
    b = GoalDistribution([0.2, 0.8])
    assert b.argmax() == 1


def test_reverse_kl_uniform_is_ln4():
    for g in range(4):
        assert divergence_to_goal(uniform(4), g) == pytest.approx(LN4, abs=1e-15)
    assert LN4 == pytest.approx(1.3863, abs=1e-4)


def test_reverse_kl_at_one_hot_is_zero():
    assert divergence_to_goal([0, 0, 1, 0], OneHotGoal(2, 4)) == 0.0


def test_reverse_kl_example():
    d = divergence_to_goal([0.5, 0.25, 0.125, 0.125], 0, ReverseKL())
    assert d == pytest.approx(LN2, abs=1e-15)


def test_reverse_kl_clamps_zero_mass():
    d, clamped = divergence_to_goal([1.0, 0.0], 1, return_flag=True)
    assert clamped
    assert d == pytest.approx(-math.log(1e-12))
    _, clamped = divergence_to_goal([0.5, 0.5], 1, return_flag=True)
    assert not clamped


def test_forward_kl_against_mpmath():
    b = [0.4, 0.3, 0.2, 0.1]
    es = 1e-6
    ref = mpmath.mpf(0)
    for j, p in enumerate(b):
        gt = 1 - es * 3 if j == 1 else es
        ref += mpmath.mpf(p) * mpmath.log(mpmath.mpf(p) / mpmath.mpf(gt))
    assert divergence_to_goal(b, 1, SmoothedForwardKL(es)) == pytest.approx(float(ref),
                                                                             abs=1e-12)


def test_forward_kl_zero_at_smoothed_target():
    es = 1e-3
    target = [es, 1 - 3 * es, es, es]
    assert divergence_to_goal(target, 1, SmoothedForwardKL(es)) == pytest.approx(0, abs=1e-15)


def test_forward_kl_eps_must_leave_room_for_target():
    with pytest.raises(ConfigurationError):
        divergence_to_goal(uniform(4), 0, SmoothedForwardKL(0.2))


def test_divergence_mode_lookup():
    assert isinstance(divergence_mode("reverse_kl"), ReverseKL)
    assert divergence_mode("smoothed_forward_kl", 1e-4).smoothing() == 1e-4
    assert ReverseKL().smoothing() == 0.0
    with pytest.raises(ConfigurationError):
        divergence_mode("js")


def test_kl_gain_examples():
    prev, curr = [0.25, 0.25, 0.25, 0.25], [0.5, 0.2, 0.2, 0.1]
    assert kl_gain(prev, curr, 0) == pytest.approx(LN2, abs=1e-15)
    assert kl_gain(curr, prev, 0) == pytest.approx(-LN2, abs=1e-15)
    assert kl_gain(curr, curr, 0) == 0.0


def test_concat_beliefs():
    assert list(concat_beliefs([[0.5, 0.5], [0.9, 0.1]])) == [0.5, 0.5, 0.9, 0.1]
    assert list(concat_beliefs([[0.3, 0.7]])) == [0.3, 0.7]
    assert concat_beliefs([]).size == 0
    with pytest.raises(ConfigurationError):
        concat_beliefs([[0.5, 0.5], [0.2, 0.3, 0.5]])


def test_aggregate_self_belief_examples():
    np.testing.assert_allclose(aggregate_self_belief([[0.3, 0.7]], [5.0]), [0.3, 0.7])
    np.testing.assert_allclose(aggregate_self_belief([[1, 0], [0, 1]], [1, 1]), [0.5, 0.5])
    np.testing.assert_allclose(aggregate_self_belief([[0.8, 0.2], [0.4, 0.6]], [3, 1]),
                               [0.7, 0.3], atol=1e-12)


def test_aggregate_self_belief_rejects_bad_weights():
    with pytest.raises(ConfigurationError):
        aggregate_self_belief([[0.5, 0.5], [0.5, 0.5]], [0, 0])
    with pytest.raises(ConfigurationError):
        aggregate_self_belief([[0.5, 0.5]], [-1])
    with pytest.raises(ConfigurationError):
        aggregate_self_belief([], [])
