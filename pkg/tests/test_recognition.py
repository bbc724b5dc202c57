from fractions import Fraction

import numpy as np
import pytest

from legible_marl._validation import ConfigurationError
from legible_marl.belief import uniform
from legible_marl.harness.criteria import exact_posterior
from legible_marl.recognition import (EmpiricalPolicyModel, MaxEntLikelihoodModel, Recognizer,
                                      SelfBeliefEstimator, StateConsistentRecognizer,
                                      action_likelihood, bayes_update, estimate_self_belief,
                                      recognize_step, train_empirical)

UP, DOWN = 0, 1


def test_maxent_flat_values_give_uniform_likelihood():
    model = MaxEntLikelihoodModel(lambda key: np.full((3, 5), 2.5))
    for a in range(5):
        np.testing.assert_allclose(action_likelihood(model, None, a), 0.2)


def test_maxent_matches_softmax():
    q = np.array([[1.0, 0.0, -1.0], [0.0, 2.0, 0.0]])
    model = MaxEntLikelihoodModel(lambda key: q, beta_like=1.5)
    e = np.exp(1.5 * q)
    ref = e / e.sum(axis=1, keepdims=True)
    for a in range(3):
        np.testing.assert_allclose(model.likelihood("k", a), ref[:, a], rtol=1e-14)


def test_maxent_goal_normalisation_option():
    q = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    model = MaxEntLikelihoodModel(lambda key: q, normalize="goals")
    lik = model.likelihood(None, 0)
    assert lik.sum() == pytest.approx(1.0)
    assert np.argmax(lik) == 0
    with pytest.raises(ConfigurationError):
        MaxEntLikelihoodModel(lambda key: q, normalize="both")


def test_maxent_huge_values_stay_finite():
    q = np.array([[1e6, 0.0], [0.0, 1e6]])
    lik = MaxEntLikelihoodModel(lambda key: q, beta_like=10.0).likelihood(0, 0)
    assert np.all(np.isfinite(lik)) and lik[1] == 1e-12


def test_empirical_laplace_example():
    m = EmpiricalPolicyModel(2, 5, laplace_alpha=1.0)
    for _ in range(7):
        m.observe("s", 0, UP)
    m.observe("s", 0, DOWN)
    assert m.likelihood("s", UP)[0] == pytest.approx(8 / 13)
    assert m.likelihood("s", UP)[1] == pytest.approx(0.2)


def test_empirical_cold_start_is_uniform():
    m = EmpiricalPolicyModel(4, 5)
    for a in range(5):
        assert list(m.likelihood(("never", "seen"), a)) == [0.2] * 4


def test_empirical_rejects_bad_action():
    with pytest.raises(ConfigurationError):
        EmpiricalPolicyModel(2, 5).likelihood(0, 5)


def test_bayes_examples():
    np.testing.assert_allclose(bayes_update(uniform(4), [0.7, 0.1, 0.1, 0.1]),
                               [0.7, 0.1, 0.1, 0.1], atol=1e-15)
    prior = [0.1, 0.2, 0.3, 0.4]
    np.testing.assert_allclose(bayes_update(prior, [0.3] * 4), prior, atol=1e-15)
    post = np.asarray(bayes_update([0.7, 0.1, 0.1, 0.1], [0.7, 0.1, 0.1, 0.1]))
    ref = [Fraction(49, 52)] + [Fraction(1, 52)] * 3
    assert max(abs(Fraction(float(a)) - b) for a, b in zip(post, ref)) < 1e-15


def test_bayes_matches_rational_oracle(rng):
    for _ in range(200):
        G = int(rng.integers(2, 7))
        prior = rng.dirichlet(np.ones(G))
        lik = rng.uniform(1e-6, 1, G)
        post = np.asarray(bayes_update(prior, lik))
        ref = exact_posterior(prior, lik)
        assert max(abs(Fraction(float(a)) - b) for a, b in zip(post, ref)) <= 1e-9


def test_bayes_degenerate_normaliser_keeps_prior():
    prior = [0.5, 0.5]
    post, flag = bayes_update(prior, [1e-305, 1e-305], return_flag=True)
    assert flag
    assert list(post) == prior
    _, flag = bayes_update(prior, [0.2, 0.3], return_flag=True)
    assert not flag


def test_bayes_floors_tiny_entries():
    post = np.asarray(bayes_update([0.5, 0.5], [1.0, 1e-20]))
    assert post[1] == 1e-12


def test_bayes_rejects_mismatch_and_negative():
    with pytest.raises(ConfigurationError):
        bayes_update([0.5, 0.5], [1, 1, 1])
    with pytest.raises(ConfigurationError):
        bayes_update([0.5, 0.5], [1, -1])


class _Fixed:
    """Backend returning one likelihood vector for every observation."""

    def __init__(self, lik):
        self.lik = np.asarray(lik, dtype=float)

    def likelihood(self, key, action):
        return self.lik


def test_recognizer_starts_uniform_and_compounds():
    rec = Recognizer(4, _Fixed([0.7, 0.1, 0.1, 0.1]))
    assert list(rec.belief) == [0.25] * 4
    recognize_step(rec, "s", 0)
    assert rec.belief[0] == pytest.approx(0.7)
    rec.step("s", 0)
    assert rec.belief[0] == pytest.approx(49 / 52)
    rec.reset()
    assert list(rec.belief) == [0.25] * 4


def test_uninformative_observation_keeps_belief():
    rec = Recognizer(3, _Fixed([0.4, 0.4, 0.4]))
    rec.belief = bayes_update(rec.belief, [0.6, 0.3, 0.1])
    before = np.asarray(rec.belief).copy()
    rec.step(None, 0)
    np.testing.assert_allclose(rec.belief, before, atol=1e-15)


def test_floored_likelihood_never_degenerates():
    # the 1e-12 likelihood floor keeps the normaliser far above 1e-300
    rec = Recognizer(2, _Fixed([0.0, 0.0]))
    for _ in range(50):
        rec.step(None, 0)
    assert rec.degenerate_steps == 0
    np.testing.assert_allclose(rec.belief, [0.5, 0.5])


def test_train_empirical_counts():
    m = EmpiricalPolicyModel(4, 5)
    train_empirical(m, [], 2)
    assert m.counts == {}
    train_empirical(m, [(1, 0), (2, 3), (1, 0)], 2)
    assert sum(int(r.sum()) for r in m.counts.values()) == 3
    assert m.counts[1][2, 0] == 2
    with pytest.raises(ConfigurationError):
        train_empirical(m, [(1, 0)], 9)


def test_deterministic_leader_likelihood_tends_to_one():
    m = EmpiricalPolicyModel(4, 5)
    probs = []
    for ep in range(100):
        train_empirical(m, [("s0", 3), ("s1", 3)], 1)
        probs.append(m.likelihood("s0", 3)[1])
    n = 100
    assert probs[-1] == pytest.approx((n + 1) / (n + 5))
    assert all(a < b for a, b in zip(probs, probs[1:]))


def test_counts_commute():
    episodes = [([(0, 1), (1, 2)], 0), ([(0, 4)], 3), ([(1, 2), (0, 1)], 2)]
    m1, m2 = EmpiricalPolicyModel(4, 5), EmpiricalPolicyModel(4, 5)
    for traj, g in episodes:
        train_empirical(m1, traj, g)
    for traj, g in reversed(episodes):
        train_empirical(m2, traj, g)
    for k in (0, 1):
        for a in range(5):
            assert list(m1.likelihood(k, a)) == list(m2.likelihood(k, a))


def test_posterior_odds_grow_geometrically():
    rho = 3.0
    rec = Recognizer(2, _Fixed([0.6, 0.2]))
    for k in range(1, 12):
        rec.step(None, 0)
        b = np.asarray(rec.belief)
        assert b[0] / b[1] == pytest.approx(rho ** k, rel=1e-9)


def test_model_csv_round_trip(tmp_path):
    m = EmpiricalPolicyModel(4, 5, 0.5)
    train_empirical(m, [(7, 1), ((3, 4), 2), (7, 1)], 3)
    path = tmp_path / "counts.csv"
    m.to_csv(path)
    assert path.read_text().splitlines()[0] == "key,goal,action,count"
    back = EmpiricalPolicyModel.from_csv(path, 4, 5, 0.5)
    assert set(back.counts) == set(m.counts)
    for k in m.counts:
        assert np.array_equal(back.counts[k], m.counts[k])


def test_self_belief_estimator():
    r1 = Recognizer(2, _Fixed([0.5, 0.5]))
    r2 = Recognizer(2, _Fixed([0.5, 0.5]))
    r1.belief, r2.belief = bayes_update([0.5, 0.5], [1, 0]), bayes_update([0.5, 0.5], [0, 1])
    np.testing.assert_allclose(SelfBeliefEstimator([r1, r2]).estimate(), [0.5, 0.5])
    r1.belief, r2.belief = bayes_update([0.5, 0.5], [0.8, 0.2]), bayes_update([0.5, 0.5],
                                                                              [0.4, 0.6])
    est = SelfBeliefEstimator([r1, r2], [3, 1])
    np.testing.assert_allclose(estimate_self_belief(est), [0.7, 0.3], atol=1e-12)
    single = SelfBeliefEstimator([r1])
    np.testing.assert_allclose(single.estimate(), r1.belief)
    with pytest.raises(ConfigurationError):
        SelfBeliefEstimator([])
    with pytest.raises(ConfigurationError):
        SelfBeliefEstimator([r1], [1, 1])


def test_single_observer_floored_belief_passes_through():
    r = Recognizer(4, _Fixed([0.9, 0.1, 0.0, 0.0]))
    r.step(None, 0)
    b = np.asarray(SelfBeliefEstimator([r]).estimate())
    np.testing.assert_allclose(b, [0.9, 0.1, 1e-12, 1e-12], atol=1e-15)


def test_maxent_likelihood_is_markov_in_key():
    calls = []

    def q_source(key):
        calls.append(key)
        return np.array([[key, 0.0], [0.0, key]], dtype=float)

    model = MaxEntLikelihoodModel(q_source)
    first = model.likelihood(2.0, 0)
    for _ in range(5):
        model.likelihood(7.0, 1)
    assert list(model.likelihood(2.0, 0)) == list(first)


def test_state_consistent_recognizer_ignores_history():
    m = EmpiricalPolicyModel(3, 5)
    train_empirical(m, [(0, 1), (0, 2), (1, 0)], 2)
    rec = StateConsistentRecognizer(m)
    b0 = np.asarray(rec.belief_at(0))
    rec.belief_at(1)
    assert list(rec.belief_at(0)) == list(b0)
    np.testing.assert_allclose(b0, np.array([1, 1, 3]) / 5)
    np.testing.assert_allclose(rec.belief_at("unseen"), [1 / 3] * 3)
