"""Training loops for the lead-follow maze.

``run_maze_reference`` drives the generic :func:`step_pipeline` with dict
based tables and is meant for short runs and cross-checks.
``run_maze_bypass`` is the same learner loop written without any call into
the legibility module.  ``MazeFastTrainer`` runs the compiled loop used for
the long sweeps.
"""
from dataclasses import dataclass

import numpy as np

from . import _fastmaze
from .belief import divergence_mode
from .envs.maze import EXIT_LABELS, LeadFollowMaze, MazeMap
from .learners import (LearnerConfig, QTable, argmax_low, confidence_bin, q_update,
                       sarsa_update, select_action)
from .legibility import EpisodeMemory, ShapingConfig, step_pipeline
from .metrics import EpisodeRecord, MetricRow, prediction_correct, ptr
from .recognition import EmpiricalPolicyModel, Recognizer, SelfBeliefEstimator, train_empirical
from .seeding import stream

N_GOALS = len(EXIT_LABELS)
N_BINS = 3
STREAMS = ("goals", "leader", "follower")


@dataclass
class MazeRunSettings:
    """Everything one maze training cell needs."""

    episodes: int = 50_000
    max_steps: int = 50
    beta: float = 0.0
    seed: int = 1
    algo: str = "q_learning"
    divergence: str = "reverse_kl"
    eps_smooth: float = 1e-6
    laplace_alpha: float = 1.0
    learner: LearnerConfig = None
    map_path: str = None
    public_target: bool = False

    def __post_init__(self):
        if self.learner is None:
            self.learner = LearnerConfig()
        if self.algo not in ("q_learning", "sarsa"):
            raise ValueError(f"maze supports q_learning or sarsa, not {self.algo!r}")

    @property
    def mode(self):
        return divergence_mode(self.divergence, self.eps_smooth)

    def layout(self):
        return MazeMap.load(self.map_path)


def encode_key(aug, n_cells, width):
    """Discrete learner key: joint cell, goal (or estimate), confidence bin."""
    lx, ly, fx, fy = (int(v) for v in aug.obs[:4])
    s = (ly * width + lx) * n_cells + (fy * width + fx)
    g = int(np.argmax(aug.own_goal))
    cb = 0
    if aug.others_beliefs.size:
        cb = confidence_bin(float(aug.others_beliefs[g]))
    return (s * N_GOALS + g) * N_BINS + cb


class TabularAgent:
    """Epsilon-greedy tabular agent for the step pipeline."""

    def __init__(self, goal, observes, table, rng, encode):
        self.goal = goal
        self.observes = observes
        self.table = table
        self.rng = rng
        self.encode = encode
        self.epsilon = 1.0

    def act(self, aug):
        return select_action(self.table.row(self.encode(aug)), self.epsilon, self.rng)

    def learn(self, tr, cfg, sarsa):
        k, k2 = self.encode(tr.s_aug), self.encode(tr.s_aug_next)
        if sarsa:
            sarsa_update(self.table, k, tr.action, tr.reward_shaped, k2, tr.action_next,
                         tr.done, cfg)
        else:
            q_update(self.table, k, tr.action, tr.reward_shaped, k2, tr.done, cfg)


def _episode_row(ep, settings, rec, ret_raw, ret_shaped):
    return MetricRow(ep, settings.seed, settings.beta, ret_raw, ret_shaped, int(rec.success),
                     ptr(rec), int(prediction_correct(rec)), rec.steps)


def run_maze_reference(settings, n_episodes=None, return_traces=False):
    """Train with the generic step pipeline.

    Returns ``(rows, state)`` and, when ``return_traces`` is set, the joint
    action sequence of every episode as a third element.
    """
    n_episodes = settings.episodes if n_episodes is None else n_episodes
    layout = settings.layout()
    env = LeadFollowMaze(layout, settings.max_steps)
    cfg = settings.learner
    sarsa = settings.algo == "sarsa"
    n_cells, width = layout.n_cells, layout.width

    def encode(aug):
        return encode_key(aug, n_cells, width)

    model = EmpiricalPolicyModel(N_GOALS, env.n_actions, settings.laplace_alpha)
    rng_goal = stream(settings.seed, "goals")
    leader = TabularAgent(None, [], QTable(5), stream(settings.seed, "leader"), encode)
    follower = TabularAgent(None, [0], QTable(5), stream(settings.seed, "follower"), encode)
    agents = [leader, follower]
    rec = Recognizer(N_GOALS, model, observed_agent=0)
    recognizers = {(1, 0): rec}
    estimators = {0: SelfBeliefEstimator([rec])}
    shaping = ShapingConfig(settings.beta, settings.mode, {0})
    rows, traces = [], []
    for ep in range(n_episodes):
        eps = cfg.epsilon(ep, settings.episodes)
        leader.epsilon = follower.epsilon = eps
        g = int(rng_goal.random() * N_GOALS)
        leader.goal = g
        if settings.public_target:
            follower.goal = g
        env.reset(g)
        rec.reset()
        memory = EpisodeMemory()
        beliefs = [np.asarray(rec.belief).copy()]
        pairs, actions = [], []
        ret_raw = ret_shaped = 0.0
        while True:
            key = env.recognition_key(0)
            out = step_pipeline(env, agents, recognizers, estimators, shaping, memory)
            beliefs.extend(np.asarray(snap[(1, 0)]) for snap in out.snapshots)
            pairs.append((key, out.actions[0]))
            actions.append(tuple(out.actions))
            ret_raw += out.rewards[0] + out.rewards[1]
            for grp in range(0, len(out.transitions), 2):
                a, b = out.transitions[grp], out.transitions[grp + 1]
                ret_shaped += a.reward_shaped + b.reward_shaped
                for tr in (a, b):
                    agents[tr.agent].learn(tr, cfg, sarsa)
            if out.done:
                break
        train_empirical(model, pairs, g)
        record = EpisodeRecord(np.array(beliefs), g, actions, success=env.world.success)
        rows.append(_episode_row(ep, settings, record, ret_raw, ret_shaped))
        traces.append(actions)
    state = {"leader": leader.table, "follower": follower.table, "counts": model}
    if return_traces:
        return rows, state, traces
    return rows, state


def run_maze_bypass(settings, n_episodes=None):
    """Independent learners with no legibility code on the path.

    The follower still runs its recognizer, since its policy input needs
    the goal estimate.  Returns ``(rows, state, traces)``.
    """
    n_episodes = settings.episodes if n_episodes is None else n_episodes
    layout = settings.layout()
    env = LeadFollowMaze(layout, settings.max_steps)
    cfg = settings.learner
    sarsa = settings.algo == "sarsa"
    model = EmpiricalPolicyModel(N_GOALS, env.n_actions, settings.laplace_alpha)
    rng_goal = stream(settings.seed, "goals")
    rng_l, rng_f = stream(settings.seed, "leader"), stream(settings.seed, "follower")
    QL, QF = QTable(5), QTable(5)
    rec = Recognizer(N_GOALS, model, observed_agent=0)

    def update(table, k, a, r, k2, a2, done):
        if sarsa:
            sarsa_update(table, k, a, r, k2, a2, done, cfg)
        else:
            q_update(table, k, a, r, k2, done, cfg)

    def follower_key(s, g):
        b = np.asarray(rec.belief)
        gh = g if settings.public_target else argmax_low(b)
        return (s * N_GOALS + gh) * N_BINS + confidence_bin(float(b[gh]))

    rows, traces = [], []
    for ep in range(n_episodes):
        eps = cfg.epsilon(ep, settings.episodes)
        g = int(rng_goal.random() * N_GOALS)
        env.reset(g)
        rec.reset()
        beliefs = [np.asarray(rec.belief).copy()]
        pairs, actions = [], []
        ret_raw = ret_shaped = 0.0
        t = 0
        prev = None
        while True:
            s = env.state_key()
            if t > 0:
                rec.step(prev[0], prev[1])
                beliefs.append(np.asarray(rec.belief).copy())
            kl = (s * N_GOALS + g) * N_BINS
            kf = follower_key(s, g)
            al = select_action(QL.row(kl), eps, rng_l)
            af = select_action(QF.row(kf), eps, rng_f)
            (rl, rf), done = env.step((al, af))
            ret_raw += rl + rf
            pairs.append((s, al))
            actions.append((al, af))
            if t > 0:
                ret_shaped += prev[4] + prev[5]
                update(QL, prev[2], prev[1], prev[4], kl, al, False)
                update(QF, prev[3], prev[6], prev[5], kf, af, False)
            prev = (s, al, kl, kf, rl, rf, af)
            t += 1
            if done:
                break
        s = env.state_key()
        rec.step(prev[0], prev[1])
        beliefs.append(np.asarray(rec.belief).copy())
        kl = (s * N_GOALS + g) * N_BINS
        kf = follower_key(s, g)
        ret_shaped += prev[4] + prev[5]
        update(QL, prev[2], prev[1], prev[4], kl, 0, True)
        update(QF, prev[3], prev[6], prev[5], kf, 0, True)
        train_empirical(model, pairs, g)
        record = EpisodeRecord(np.array(beliefs), g, actions, success=env.world.success)
        rows.append(_episode_row(ep, settings, record, ret_raw, ret_shaped))
        traces.append(actions)
    return rows, {"leader": QL, "follower": QF, "counts": model}, traces


class MazeFastTrainer:
    """Compiled training cell; state persists across :meth:`run` calls."""

    def __init__(self, settings, shaping=True):
        self.settings = settings
        self.shaping = bool(shaping)
        self.layout = settings.layout()
        C = self.layout.n_cells
        n_keys = C * C * N_GOALS * N_BINS
        self.QL = np.zeros((n_keys, 5))
        self.QF = np.zeros((n_keys, 5))
        self.counts = np.zeros((C * C, N_GOALS, 5))
        self.rngs = {n: stream(settings.seed, n) for n in STREAMS}
        self.episode = 0
        mode = settings.mode
        self._es = mode.smoothing()

    @property
    def done(self):
        return self.episode >= self.settings.episodes

    def run(self, n=None, record_actions=False):
        """Train the next ``n`` episodes; returns an (n, 7) float array.

        Columns: return_raw, return_shaped, success, ptr, pred_correct,
        steps, goal.  With ``record_actions`` also returns the joint
        actions, shape (n, max_steps, 2), padded with -1.
        """
        st = self.settings
        n = st.episodes - self.episode if n is None else min(n, st.episodes - self.episode)
        out = np.zeros((n, _fastmaze.OUT_COLS))
        traj = np.full((n if record_actions else 0, st.max_steps, 2), -1, dtype=np.int64)
        lay = self.layout
        cfg = st.learner
        _fastmaze.train_chunk(
            self.QL, self.QF, self.counts, self.rngs["goals"], self.rngs["leader"],
            self.rngs["follower"], lay.next_cell, lay.exit_cells(),
            lay.cell(lay.leader_start), lay.cell(lay.follower_start), lay.n_cells,
            self.episode, self.episode + n, st.episodes, st.max_steps, float(st.beta),
            self._es, self.shaping, st.algo == "sarsa", cfg.alpha, cfg.gamma,
            cfg.eps_start, cfg.eps_end, cfg.eps_fraction, st.laplace_alpha, st.public_target,
            out, traj)
        self.episode += n
        if record_actions:
            return out, traj
        return out

    def metric_rows(self, out, first_episode):
        st = self.settings
        return [MetricRow(first_episode + i, st.seed, st.beta, float(r[0]), float(r[1]),
                          int(r[2]), float(r[3]), int(r[4]), int(r[5]))
                for i, r in enumerate(out)]

    def tables(self):
        return {"leader": QTable.from_dense(self.QL), "follower": QTable.from_dense(self.QF)}

    def policy_model(self):
        """Recognizer counts as an :class:`EmpiricalPolicyModel`."""
        model = EmpiricalPolicyModel(N_GOALS, 5, self.settings.laplace_alpha)
        for s in np.nonzero(self.counts.reshape(len(self.counts), -1).any(axis=1))[0]:
            model.counts[int(s)] = self.counts[s].astype(np.int64)
        return model
