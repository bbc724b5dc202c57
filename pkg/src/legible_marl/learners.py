"""Value learners: tabular Q-learning / SARSA and a tile-coded TD learner."""
import csv
import math
import struct
from dataclasses import dataclass

import numpy as np

from ._validation import ConfigurationError, DivergenceError, check_int, check_interval

CONF_EDGES = (0.5, 0.8)


@dataclass
class LearnerConfig:
    """Step size, discount and a linear epsilon schedule.

    Epsilon decays linearly from ``eps_start`` to ``eps_end`` over the first
    ``eps_fraction`` of the episodes and then stays at ``eps_end``.
    """

    alpha: float = 0.1
    gamma: float = 0.95
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.8

    def __post_init__(self):
        check_interval(self.alpha, "alpha", 0.0, 1.0, low_open=True)
        check_interval(self.gamma, "gamma", 0.0, 1.0, low_open=True)
        check_interval(self.eps_start, "eps_start", 0.0, 1.0)
        check_interval(self.eps_end, "eps_end", 0.0, 1.0)
        check_interval(self.eps_fraction, "eps_fraction", 0.0, 1.0, low_open=True)

    def epsilon(self, episode, n_episodes):
        return epsilon_at(episode, n_episodes, self.eps_start, self.eps_end,
                          self.eps_fraction)


def epsilon_at(episode, n_episodes, start, end, fraction):
    frac = episode / (fraction * n_episodes)
    eps = start - (start - end) * frac
    return eps if eps > end else end


def argmax_low(q):
    """Index of the largest entry, lowest index on ties."""
    best = 0
    for i in range(1, len(q)):
        if q[i] > q[best]:
            best = i
    return best


def select_action(q_values, epsilon, rng):
    """Epsilon-greedy choice driven only by ``rng.random()`` draws."""
    q = np.asarray(q_values, dtype=float)
    if q.ndim != 1 or q.size == 0 or not np.all(np.isfinite(q)):
        raise ConfigurationError("q_values must be a non-empty finite vector")
    if rng.random() < epsilon:
        return int(rng.random() * q.size)
    return argmax_low(q)


def confidence_bin(conf):
    """Quantise the probability of the argmax goal into three bins."""
    if conf < CONF_EDGES[0]:
        return 0
    if conf < CONF_EDGES[1]:
        return 1
    return 2


class QTable:
    """Sparse action-value table; unseen keys read as zeros."""

    def __init__(self, n_actions):
        self.n_actions = check_int(n_actions, "n_actions", 1)
        self._rows = {}
        self._zeros = np.zeros(self.n_actions)
        self._zeros.setflags(write=False)

    def row(self, key):
        return self._rows.get(key, self._zeros)

    def _mutable(self, key):
        r = self._rows.get(key)
        if r is None:
            r = np.zeros(self.n_actions)
            self._rows[key] = r
        return r

    def get(self, key, action):
        return float(self.row(key)[action])

    def set(self, key, action, value):
        if not math.isfinite(value):
            raise DivergenceError(f"non-finite Q value at {key!r}")
        self._mutable(key)[action] = value

    def keys(self):
        return self._rows.keys()

    def __len__(self):
        return len(self._rows)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["key", "action", "value"])
            for key in sorted(self._rows, key=_sort_key):
                for a, v in enumerate(self._rows[key]):
                    if v != 0.0:
                        w.writerow([_key_str(key), a, repr(float(v))])

    @classmethod
    def from_csv(cls, path, n_actions):
        table = cls(n_actions)
        with open(path, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                table.set(_parse_key(rec["key"]), int(rec["action"]), float(rec["value"]))
        return table

    @classmethod
    def from_dense(cls, array):
        """Wrap the non-zero rows of a dense (keys, actions) array."""
        array = np.asarray(array, dtype=float)
        table = cls(array.shape[1])
        for k in np.nonzero(np.any(array != 0.0, axis=1))[0]:
            table._rows[int(k)] = array[k].copy()
        return table


def _sort_key(key):
    return key if isinstance(key, tuple) else (key,)


def _key_str(key):
    if isinstance(key, tuple):
        return "|".join(str(k) for k in key)
    return str(key)


def _parse_key(s):
    parts = s.split("|")
    vals = tuple(int(p) for p in parts)
    return vals if len(vals) > 1 else vals[0]


def _td_write(table, key, action, target, cfg):
    q = table.get(key, action)
    new = q + cfg.alpha * (target - q)
    if not math.isfinite(new):
        raise DivergenceError(f"TD update diverged at {key!r}")
    table.set(key, action, new)
    return table


def q_update(table, key, action, reward_shaped, key_next, done, cfg):
    """One Q-learning backup of ``Q(key, action)``."""
    if done:
        target = reward_shaped
    else:
        target = reward_shaped + cfg.gamma * float(np.max(table.row(key_next)))
    return _td_write(table, key, action, target, cfg)


def sarsa_update(table, key, action, reward_shaped, key_next, action_next, done, cfg):
    """One SARSA backup using the action actually taken next."""
    if done:
        target = reward_shaped
    else:
        target = reward_shaped + cfg.gamma * table.get(key_next, action_next)
    return _td_write(table, key, action, target, cfg)


class TileCoder:
    """Grid tile coding with uniformly offset tilings and one weight vector per action.

    Parameters
    ----------
    low, high : array-like
        Per-dimension bounds; inputs are clipped into them.
    n_actions : int
    tilings : int, default 8
    tiles : int, default 8
        Tiles per dimension in each tiling.
    """

    MAGIC = b"TILE"
    VERSION = 1

    def __init__(self, low, high, n_actions, tilings=8, tiles=8):
        self.low = np.asarray(low, dtype=float)
        self.high = np.asarray(high, dtype=float)
        if self.low.shape != self.high.shape or self.low.ndim != 1:
            raise ConfigurationError("low/high must be 1-d and equal length")
        if np.any(self.high <= self.low):
            raise ConfigurationError("high must exceed low in every dimension")
        self.n_dims = self.low.size
        self.n_actions = check_int(n_actions, "n_actions", 1)
        self.tilings = check_int(tilings, "tilings", 1)
        self.tiles = check_int(tiles, "tiles", 1)
        # one extra tile per dimension absorbs the offset overhang
        self.per_dim = self.tiles + 1
        self.tiling_size = self.per_dim ** self.n_dims
        self.n_features = self.tilings * self.tiling_size
        self.width = (self.high - self.low) / self.tiles
        # displacement vector (1, 3, 5, ...) keeps tilings asymmetric
        disp = 2 * np.arange(self.n_dims) + 1
        self.offsets = (np.arange(self.tilings)[:, None] * disp[None, :] % self.tilings
                        ) * self.width / self.tilings
        self.weights = np.zeros((self.n_actions, self.n_features))

    def indices(self, x):
        """Active feature indices, one per tiling."""
        x = np.clip(np.asarray(x, dtype=float), self.low, self.high)
        return tile_indices(x, self.low, self.width, self.offsets, self.per_dim,
                            self.tiling_size)

    def _sum(self, action, idx):
        # sequential sum so compiled learners reproduce it exactly
        total = 0.0
        w = self.weights[action]
        for i in idx:
            total += w[i]
        return total

    def q(self, x, action):
        return self._sum(action, self.indices(x))

    def q_all(self, x):
        idx = self.indices(x)
        return np.array([self._sum(a, idx) for a in range(self.n_actions)])

    def update(self, x, action, target, alpha):
        idx = self.indices(x)
        delta = target - self._sum(action, idx)
        self.weights[action, idx] += (alpha / self.tilings) * delta
        if not np.all(np.isfinite(self.weights[action, idx])):
            raise DivergenceError("tile weights became non-finite")
        return self

    def save(self, path):
        header = self.MAGIC + struct.pack("<III", self.VERSION, self.n_actions,
                                          self.n_features)
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(self.weights.astype("<f8").tobytes())

    def load(self, path):
        with open(path, "rb") as fh:
            head = fh.read(16)
            if len(head) != 16 or head[:4] != self.MAGIC:
                raise ConfigurationError(f"{path} is not a tile-coder checkpoint")
            version, n_act, n_feat = struct.unpack("<III", head[4:])
            if version != self.VERSION or (n_act, n_feat) != (self.n_actions, self.n_features):
                raise ConfigurationError("checkpoint shape does not match this coder")
            data = np.frombuffer(fh.read(), dtype="<f8")
        if data.size != n_act * n_feat:
            raise ConfigurationError("truncated tile-coder checkpoint")
        self.weights = data.reshape(n_act, n_feat).astype(float)
        return self


def tile_indices(x, low, width, offsets, per_dim, tiling_size):
    tilings, n_dims = offsets.shape
    out = np.empty(tilings, dtype=np.int64)
    for t in range(tilings):
        flat = 0
        for d in range(n_dims):
            c = int((x[d] - low[d] + offsets[t, d]) / width[d])
            flat = flat * per_dim + c
        out[t] = t * tiling_size + flat
    return out


def tile_q(coder, x, action):
    return coder.q(x, action)


def tile_update(coder, transition, cfg):
    """Semi-gradient TD(0) with a greedy bootstrap.

    ``transition`` is (x, action, reward_shaped, x_next, done).
    """
    x, action, r, x_next, done = transition
    target = r if done else r + cfg.gamma * float(np.max(coder.q_all(x_next)))
    return coder.update(x, action, target, cfg.alpha)


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform sampling."""

    def __init__(self, capacity=50_000, batch_size=64):
        self.capacity = check_int(capacity, "capacity", 1)
        self.batch_size = check_int(batch_size, "batch_size", 1)
        self._items = []
        self._next = 0

    def __len__(self):
        return len(self._items)

    def add(self, item):
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._next] = item
        self._next = (self._next + 1) % self.capacity

    def sample(self, rng, n=None):
        n = self.batch_size if n is None else n
        n = min(n, len(self._items))
        idx = rng.choice(len(self._items), size=n, replace=False)
        return [self._items[i] for i in idx]
