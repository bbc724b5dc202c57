"""Goal sets, beliefs over goals, and divergences to a true goal.

Beliefs are plain vectors on the probability simplex.  The functions here
accept either a :class:`GoalDistribution` or any 1-d array-like; internally
everything is a float64 numpy array.

Scalar reductions are written as explicit left-to-right loops so that the
compiled training kernels (see ``_fastmaze``) reproduce them bit for bit.
"""
import math
from dataclasses import dataclass

import numpy as np

from ._validation import ConfigurationError, check_distribution, check_interval

EPS_FLOOR = 1e-12


class GoalSet:
    """Ordered, fixed collection of goal labels.

    Parameters
    ----------
    goals : sequence of hashable
        Goal identifiers. Index ``i`` always refers to ``goals[i]``.
    """

    def __init__(self, goals):
        goals = tuple(goals)
        if len(goals) < 2:
            raise ConfigurationError("a goal set needs at least two goals")
        if len(set(goals)) != len(goals):
            raise ConfigurationError(f"duplicate goal identifiers in {goals!r}")
        self._goals = goals
        self._index = {g: i for i, g in enumerate(goals)}

    @property
    def goals(self):
        return self._goals

    def __len__(self):
        return len(self._goals)

    def __iter__(self):
        return iter(self._goals)

    def __eq__(self, other):
        return isinstance(other, GoalSet) and other._goals == self._goals

    def __hash__(self):
        return hash(self._goals)

    def index(self, label):
        try:
            return self._index[label]
        except KeyError:
            raise ConfigurationError(f"unknown goal {label!r}") from None

    def one_hot(self, label):
        return OneHotGoal(self.index(label), len(self))

    def __repr__(self):
        return f"GoalSet({list(self._goals)!r})"


class GoalDistribution:
    """Immutable probability vector over a goal set."""

    __slots__ = ("_p",)

    def __init__(self, probs):
        arr = check_distribution(probs, "GoalDistribution").copy()
        arr.setflags(write=False)
        self._p = arr

    @property
    def probs(self):
        return self._p

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._p
        return self._p.astype(dtype)

    def __len__(self):
        return self._p.size

    def __getitem__(self, k):
        return self._p[k]

    def argmax(self):
        """Index of the most probable goal, lowest index on ties."""
        return int(np.argmax(self._p))

    def __repr__(self):
        return f"GoalDistribution({np.array2string(self._p, precision=4)})"


@dataclass(frozen=True)
class OneHotGoal:
    """A goal index together with the goal-set size."""

    index: int
    n_goals: int

    def __post_init__(self):
        if not 0 <= self.index < self.n_goals:
            raise ConfigurationError(
                f"goal index {self.index} outside [0, {self.n_goals})")

    def vector(self):
        v = np.zeros(self.n_goals)
        v[self.index] = 1.0
        return v


@dataclass(frozen=True)
class ReverseKL:
    """D(g || b) with g one-hot, i.e. ``-ln b(g*)``."""

    def smoothing(self):
        return 0.0


@dataclass(frozen=True)
class SmoothedForwardKL:
    """D(b || g~) where g~ puts ``eps_smooth`` on every wrong goal."""

    eps_smooth: float = 1e-6

    def __post_init__(self):
        check_interval(self.eps_smooth, "eps_smooth", 0.0, 0.5, low_open=True,
                       high_open=True)

    def smoothing(self):
        return float(self.eps_smooth)


def divergence_mode(name="reverse_kl", eps_smooth=1e-6):
    """Build a divergence mode from a config string."""
    if name in ("reverse_kl", "reverse"):
        return ReverseKL()
    if name in ("smoothed_forward_kl", "forward"):
        return SmoothedForwardKL(eps_smooth)
    raise ConfigurationError(f"unknown divergence mode {name!r}")


def _goal_index(g, n):
    idx = g.index if isinstance(g, OneHotGoal) else int(g)
    if not 0 <= idx < n:
        raise ConfigurationError(f"goal index {idx} outside [0, {n})")
    return idx


def _check_mode(mode, n):
    if isinstance(mode, SmoothedForwardKL) and not mode.eps_smooth < 0.5 / n:
        raise ConfigurationError(
            f"eps_smooth={mode.eps_smooth} must be below 0.5/|G| = {0.5 / n}")


def uniform(goal_set):
    """Uniform belief over ``goal_set`` (a GoalSet or a goal count)."""
    n = len(goal_set) if not isinstance(goal_set, int) else goal_set
    if n < 2:
        raise ConfigurationError("a goal set needs at least two goals")
    return GoalDistribution(np.full(n, 1.0 / n))


def divergence_to_goal(b, g, mode=None, return_flag=False):
    """Divergence between a belief and the true goal.

    Parameters
    ----------
    b : GoalDistribution or array-like
    g : OneHotGoal or int
    mode : ReverseKL or SmoothedForwardKL, default ReverseKL
    return_flag : bool
        Also return whether the belief on the true goal had to be clamped.

    Returns
    -------
    float, or (float, bool) when ``return_flag`` is set.
    """
    p = check_distribution(b, "belief")
    n = p.size
    k = _goal_index(g, n)
    mode = ReverseKL() if mode is None else mode
    _check_mode(mode, n)
    clamped = False
    if isinstance(mode, ReverseKL):
        pg = float(p[k])
        if pg < EPS_FLOOR:
            clamped = True
        d = -math.log(max(pg, EPS_FLOOR))
    else:
        d = _forward_kl(p, k, mode.eps_smooth)
    if return_flag:
        return d, clamped
    return d


def _forward_kl(p, k, es):
    n = p.size
    d = 0.0
    for j in range(n):
        gt = 1.0 - es * (n - 1) if j == k else es
        pj = float(p[j])
        if pj > 0:
            d += pj * math.log(pj / gt)
    # Rounding can leave a tiny negative value at the minimiser.
    return d if d > 0.0 else 0.0


def kl_gain(b_prev, b_curr, g, mode=None):
    """Decrease in divergence to the true goal from ``b_prev`` to ``b_curr``."""
    return divergence_to_goal(b_prev, g, mode) - divergence_to_goal(b_curr, g, mode)


def concat_beliefs(parts):
    """Concatenate the beliefs held about other agents into one flat vector."""
    parts = [np.asarray(p, dtype=float) for p in parts]
    if not parts:
        return np.zeros(0)
    n = parts[0].size
    for p in parts:
        if p.ndim != 1 or p.size != n:
            raise ConfigurationError("all beliefs must be over the same goal set")
    return np.concatenate(parts)


def aggregate_self_belief(per_observer, weights=None):
    """Weighted mean of the observers' beliefs about one agent.

    The mean is ``sum_j w_j b_j / (N-1)`` and is renormalised onto the
    simplex afterwards, so only the relative weights matter.
    """
    parts = [check_distribution(p, "observer belief") for p in per_observer]
    if not parts:
        raise ConfigurationError("need at least one observer belief")
    n = parts[0].size
    if any(p.size != n for p in parts):
        raise ConfigurationError("observer beliefs differ in length")
    if weights is None:
        weights = [1.0] * len(parts)
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(parts),):
        raise ConfigurationError("one weight per observer is required")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ConfigurationError("weights must be finite and non-negative")
    if not np.any(w > 0):
        raise ConfigurationError("weights must not all be zero")
    if len(parts) == 1:
        return GoalDistribution(parts[0])
    acc = np.zeros(n)
    for wj, p in zip(w, parts):
        acc += wj * p
    acc /= len(parts)
    return GoalDistribution(acc / acc.sum())
