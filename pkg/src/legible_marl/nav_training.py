"""Training loops for particle navigation with tile-coded learners.

Agent 0 knows the target.  Agent 1 acts on its estimate of agent 0's goal
and is shaped towards making the team target readable to agent 2, which in
turn acts on its estimate of agent 1's goal.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _fastnav
from .belief import divergence_mode
from .envs.particle import (CANONICAL_LANDMARKS, CANONICAL_OBSTACLES, N_AGENTS, N_LANDMARKS,
                            ParticleConfig, SimpleNavigation, heuristic_q)
from .learners import LearnerConfig, TileCoder, select_action, tile_update
from .legibility import EpisodeMemory, ShapingConfig, step_pipeline
from .metrics import EpisodeRecord, MetricRow, prediction_correct, ptr
from .recognition import MaxEntLikelihoodModel, Recognizer, SelfBeliefEstimator
from .seeding import stream

STREAMS = ("env", "agent0", "agent1", "agent2")
FEATURE_LOW = (-1.6, -1.6, -0.5, -0.5)
FEATURE_HIGH = (1.6, 1.6, 0.5, 0.5)


@dataclass
class NavRunSettings:
    episodes: int = 10_000
    beta: float = 0.0
    seed: int = 1
    divergence: str = "reverse_kl"
    eps_smooth: float = 1e-6
    beta_like: float = 1.0
    tilings: int = 8
    tiles: int = 8
    physics: ParticleConfig = field(default_factory=ParticleConfig)
    learner: LearnerConfig = None

    def __post_init__(self):
        if self.learner is None:
            self.learner = LearnerConfig()

    @property
    def mode(self):
        return divergence_mode(self.divergence, self.eps_smooth)

    @property
    def max_steps(self):
        return self.physics.max_steps

    def coder(self):
        return TileCoder(FEATURE_LOW, FEATURE_HIGH, 5, self.tilings, self.tiles)


def nav_features(aug):
    """Offset to the (estimated) goal landmark and own velocity."""
    v = aug.obs[2:4]
    rel = aug.obs[4:4 + 2 * N_LANDMARKS].reshape(N_LANDMARKS, 2)
    k = int(np.argmax(aug.own_goal))
    return np.array([rel[k, 0], rel[k, 1], v[0], v[1]])


def make_q_source(landmarks, phys):
    def q_source(key):
        out = np.zeros((len(landmarks), 5))
        heuristic_q(key[0], key[1], key[2], key[3], landmarks, phys, out)
        return out
    return q_source


class TileAgent:
    def __init__(self, goal, observes, coder, rng, knows_goal=True):
        self.goal = goal
        self.observes = observes
        self.coder = coder
        self.rng = rng
        self.knows_goal = knows_goal
        self.epsilon = 1.0

    def act(self, aug):
        return select_action(self.coder.q_all(nav_features(aug)), self.epsilon, self.rng)

    def learn(self, tr, cfg):
        tile_update(self.coder, (nav_features(tr.s_aug), tr.action, tr.reward_shaped,
                                 nav_features(tr.s_aug_next), tr.done), cfg)


def run_nav_reference(settings, n_episodes=None):
    """Train through the generic step pipeline.  Returns (rows, agents)."""
    n_episodes = settings.episodes if n_episodes is None else n_episodes
    env = SimpleNavigation(settings.physics)
    cfg = settings.learner
    rng_env = stream(settings.seed, "env")
    agents = [TileAgent(None, [], settings.coder(), stream(settings.seed, "agent0")),
              TileAgent(None, [0], settings.coder(), stream(settings.seed, "agent1"),
                        knows_goal=False),
              TileAgent(None, [1], settings.coder(), stream(settings.seed, "agent2"))]
    phys = settings.physics.physics()
    rows = []
    for ep in range(n_episodes):
        eps = cfg.epsilon(ep, settings.episodes)
        for a in agents:
            a.epsilon = eps
        g = int(rng_env.random() * N_LANDMARKS)
        world = env.reset(rng_env, g)
        backend = MaxEntLikelihoodModel(make_q_source(world.landmarks, phys), settings.beta_like)
        recs = {(1, 0): Recognizer(N_LANDMARKS, backend, 0),
                (2, 1): Recognizer(N_LANDMARKS, backend, 1)}
        estimators = {0: SelfBeliefEstimator([recs[(1, 0)]]),
                      1: SelfBeliefEstimator([recs[(2, 1)]])}
        agents[0].goal = agents[1].goal = g
        shaping = ShapingConfig(settings.beta, settings.mode, {0, 1})
        memory = EpisodeMemory()
        beliefs = [np.asarray(recs[(1, 0)].belief).copy()]
        ret_raw = ret_shaped = 0.0
        while True:
            out = step_pipeline(env, agents, recs, estimators, shaping, memory)
            beliefs.extend(np.asarray(s[(1, 0)]) for s in out.snapshots)
            r = out.rewards
            ret_raw += r[0] + r[1] + r[2]
            for grp in range(0, len(out.transitions), N_AGENTS):
                trs = out.transitions[grp:grp + N_AGENTS]
                ret_shaped += trs[0].reward_shaped + trs[1].reward_shaped + trs[2].reward_shaped
                for tr in trs:
                    agents[tr.agent].learn(tr, cfg)
            if out.done:
                break
        record = EpisodeRecord(np.array(beliefs), g, success=env.world.success)
        rows.append(MetricRow(ep, settings.seed, settings.beta, ret_raw, ret_shaped,
                              int(record.success), ptr(record),
                              int(prediction_correct(record)), record.steps))
    return rows, agents


class NavFastTrainer:
    """Compiled navigation cell; state persists across :meth:`run` calls."""

    def __init__(self, settings, shaping=True):
        self.settings = settings
        self.shaping = bool(shaping)
        self.coder = settings.coder()
        self.W = np.zeros((N_AGENTS, 5, self.coder.n_features))
        self.rngs = {n: stream(settings.seed, n) for n in STREAMS}
        self.episode = 0
        self._es = settings.mode.smoothing()
        self._env = SimpleNavigation(settings.physics)

    @property
    def done(self):
        return self.episode >= self.settings.episodes

    def run(self, n=None):
        st = self.settings
        n = st.episodes - self.episode if n is None else min(n, st.episodes - self.episode)
        out = np.zeros((n, _fastnav.OUT_COLS))
        c = self.coder
        phys = st.physics
        _fastnav.train_chunk(
            self.W, self.rngs["env"], self.rngs["agent0"], self.rngs["agent1"],
            self.rngs["agent2"], np.ascontiguousarray(CANONICAL_LANDMARKS),
            np.asarray(CANONICAL_OBSTACLES, dtype=float), phys.physics(),
            phys.capture_radius, phys.success_bonus, self.episode, self.episode + n,
            st.episodes, phys.max_steps, float(st.beta), self._es, self.shaping,
            st.beta_like, c.low, c.high, c.width, c.offsets, c.per_dim, c.tiling_size,
            st.learner.alpha, st.learner.gamma, st.learner.eps_start, st.learner.eps_end,
            st.learner.eps_fraction, out)
        self.episode += n
        return out

    def metric_rows(self, out, first_episode):
        st = self.settings
        return [MetricRow(first_episode + i, st.seed, st.beta, float(r[0]), float(r[1]),
                          int(r[2]), float(r[3]), int(r[4]), int(r[5]))
                for i, r in enumerate(out)]

    def coders(self):
        out = []
        for i in range(N_AGENTS):
            c = self.settings.coder()
            c.weights = self.W[i].copy()
            out.append(c)
        return out
