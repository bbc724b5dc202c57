"""Goal recognition: inferring another agent's goal from its actions.

Two likelihood backends are provided.  :class:`EmpiricalPolicyModel` learns
per-goal action frequencies from labelled trajectories with Laplace
smoothing.  :class:`MaxEntLikelihoodModel` turns per-goal action values into
a Boltzmann action distribution.
"""
import csv
import math

import numpy as np

from ._validation import ConfigurationError, check_distribution, check_positive
from .belief import EPS_FLOOR, GoalDistribution, aggregate_self_belief, uniform

DEGENERATE_NORMALIZER = 1e-300


class EmpiricalPolicyModel:
    """Laplace-smoothed action counts per (observation key, goal).

    Parameters
    ----------
    n_goals, n_actions : int
    laplace_alpha : float, default 1.0
    """

    def __init__(self, n_goals, n_actions, laplace_alpha=1.0):
        if n_goals < 2 or n_actions < 1:
            raise ConfigurationError("need n_goals >= 2 and n_actions >= 1")
        self.n_goals = int(n_goals)
        self.n_actions = int(n_actions)
        self.laplace_alpha = check_positive(laplace_alpha, "laplace_alpha")
        self.counts = {}

    def _row(self, key):
        row = self.counts.get(key)
        if row is None:
            row = np.zeros((self.n_goals, self.n_actions), dtype=np.int64)
            self.counts[key] = row
        return row

    def likelihood(self, key, action):
        """P(action | key, goal) for every goal."""
        if not 0 <= action < self.n_actions:
            raise ConfigurationError(f"action {action} out of range")
        a = self.laplace_alpha
        row = self.counts.get(key)
        if row is None:
            return np.full(self.n_goals, a / (a * self.n_actions))
        out = np.empty(self.n_goals)
        for k in range(self.n_goals):
            tot = 0.0
            for j in range(self.n_actions):
                tot += float(row[k, j])
            out[k] = (float(row[k, action]) + a) / (tot + a * self.n_actions)
        return out

    def action_distribution(self, key, goal):
        return np.array([self.likelihood(key, a)[goal] for a in range(self.n_actions)])

    def observe(self, key, goal, action):
        self._row(key)[goal, action] += 1

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["key", "goal", "action", "count"])
            for key in sorted(self.counts, key=repr):
                row = self.counts[key]
                for g, a in zip(*np.nonzero(row)):
                    w.writerow([_key_to_str(key), int(g), int(a), int(row[g, a])])

    @classmethod
    def from_csv(cls, path, n_goals, n_actions, laplace_alpha=1.0):
        model = cls(n_goals, n_actions, laplace_alpha)
        with open(path, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                key = _key_from_str(rec["key"])
                model._row(key)[int(rec["goal"]), int(rec["action"])] = int(rec["count"])
        return model


def _key_to_str(key):
    if isinstance(key, tuple):
        return "|".join(str(int(k)) for k in key)
    return str(int(key))


def _key_from_str(s):
    if "|" in s:
        return tuple(int(k) for k in s.split("|"))
    return int(s)


class MaxEntLikelihoodModel:
    """Boltzmann action likelihood from per-goal action values.

    Parameters
    ----------
    q_source : callable
        ``q_source(key)`` returns an array of shape (n_goals, n_actions).
    beta_like : float, default 1.0
        Inverse temperature multiplying the action values.
    normalize : {"actions", "goals"}
        "actions" makes each goal's likelihood a distribution over actions.
        "goals" instead normalises each action's values across goals.
    """

    def __init__(self, q_source, beta_like=1.0, normalize="actions"):
        if normalize not in ("actions", "goals"):
            raise ConfigurationError(f"normalize must be 'actions' or 'goals', got {normalize!r}")
        self.q_source = q_source
        self.beta_like = check_positive(beta_like, "beta_like")
        self.normalize = normalize

    def table(self, key):
        q = np.asarray(self.q_source(key), dtype=float)
        if q.ndim != 2:
            raise ConfigurationError("q_source must return a (goals, actions) array")
        return q

    def likelihood(self, key, action):
        q = self.table(key)
        n_goals, n_actions = q.shape
        if not 0 <= action < n_actions:
            raise ConfigurationError(f"action {action} out of range")
        b = self.beta_like
        out = np.empty(n_goals)
        if self.normalize == "actions":
            for k in range(n_goals):
                m = q[k, 0]
                for a in range(1, n_actions):
                    m = max(m, q[k, a])
                tot = 0.0
                for a in range(n_actions):
                    tot += math.exp(b * (q[k, a] - m))
                out[k] = math.exp(b * (q[k, action] - m)) / tot
        else:
            m = q[:, action].max()
            tot = 0.0
            for k in range(n_goals):
                out[k] = math.exp(b * (q[k, action] - m))
                tot += out[k]
            out /= tot
        return np.maximum(out, EPS_FLOOR)


def action_likelihood(backend, key, action):
    """Likelihood of ``action`` at ``key`` under every goal hypothesis."""
    return np.maximum(np.asarray(backend.likelihood(key, action), dtype=float), EPS_FLOOR)


def bayes_update(prior, likelihood, return_flag=False):
    """Posterior proportional to ``likelihood * prior``.

    Entries are floored at ``EPS_FLOOR`` after normalisation.  If the
    normaliser underflows the prior is returned unchanged and the
    degenerate flag is set.
    """
    p = check_distribution(prior, "prior")
    lik = np.asarray(likelihood, dtype=float)
    if lik.shape != p.shape:
        raise ConfigurationError("likelihood and prior lengths differ")
    if np.any(lik < 0) or not np.all(np.isfinite(lik)):
        raise ConfigurationError("likelihood entries must be finite and >= 0")
    post = np.empty(p.size)
    z = 0.0
    for k in range(p.size):
        post[k] = lik[k] * p[k]
        z += post[k]
    if z < DEGENERATE_NORMALIZER:
        out = GoalDistribution(p)
        return (out, True) if return_flag else out
    for k in range(p.size):
        post[k] = max(post[k] / z, EPS_FLOOR)
    out = GoalDistribution(post)
    return (out, False) if return_flag else out


class Recognizer:
    """Tracks one observer's belief about one observed agent's goal."""

    def __init__(self, n_goals, backend, observed_agent=None):
        self.n_goals = int(n_goals)
        self.backend = backend
        self.observed_agent = observed_agent
        self.degenerate_steps = 0
        self.reset()

    def reset(self):
        self.belief = uniform(self.n_goals)
        return self.belief

    def step(self, key, action):
        return recognize_step(self, key, action)


def recognize_step(rec, key, action):
    """Fold one observed (key, action) pair into the recognizer's belief."""
    lik = action_likelihood(rec.backend, key, action)
    post, degenerate = bayes_update(rec.belief, lik, return_flag=True)
    if degenerate:
        rec.degenerate_steps += 1
    rec.belief = post
    return post


def train_empirical(model, trajectory, true_goal):
    """Count every (key, action) pair of a finished episode under its goal.

    ``trajectory`` is an iterable of (key, action) pairs.
    """
    g = true_goal.index if hasattr(true_goal, "index") else int(true_goal)
    if not 0 <= g < model.n_goals:
        raise ConfigurationError(f"goal {g} out of range")
    for key, action in trajectory:
        model.observe(key, g, int(action))
    return model


class SelfBeliefEstimator:
    """Estimates how the observers currently read one agent's goal.

    Queries the observers' recognizers directly and averages their beliefs
    with weights ``omega``.
    """

    def __init__(self, observers, weights=None):
        self.observers = list(observers)
        if not self.observers:
            raise ConfigurationError("an agent nobody observes has no self-belief")
        if weights is None:
            weights = [1.0] * len(self.observers)
        if len(weights) != len(self.observers):
            raise ConfigurationError("one weight per observer is required")
        self.weights = [float(w) for w in weights]

    def estimate(self):
        return estimate_self_belief(self)


def estimate_self_belief(est):
    if not est.observers:
        raise ConfigurationError("an agent nobody observes has no self-belief")
    return aggregate_self_belief([r.belief for r in est.observers], est.weights)


class StateConsistentRecognizer:
    """Frozen recognizer whose belief depends on the current key only.

    The belief at a key is the Laplace-smoothed share of visits to that key
    made under each goal, read off a frozen :class:`EmpiricalPolicyModel`.
    Unlike a Bayes filter it forgets the path taken, so revisiting a key
    always reproduces the same belief.
    """

    def __init__(self, model):
        self.model = model
        self.n_goals = model.n_goals
        self._cache = {}

    def belief_at(self, key):
        b = self._cache.get(key)
        if b is None:
            a = self.model.laplace_alpha
            row = self.model.counts.get(key)
            visits = np.zeros(self.n_goals) if row is None else row.sum(axis=1)
            w = visits + a
            b = GoalDistribution(np.maximum(w / w.sum(), EPS_FLOOR))
            self._cache[key] = b
        return b
