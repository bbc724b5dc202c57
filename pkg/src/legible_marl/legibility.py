"""KL-gain reward shaping and the synchronized multiagent step.

Every step runs, in order:

(a) each observer folds the previous joint action into its recognizers,
(b) each shaped agent reads how its observers currently see its goal,
(c) each agent acts epsilon-greedily on its augmented observation,
(d) the world advances on the joint action,
(e) each shaped agent scores its previous action by the drop in divergence
    between its self-belief and its true goal (zero on the first step),
(f) transitions for the previous actions are emitted with shaped rewards.

The reward for an action is therefore only known one step later.  When the
episode ends, :func:`step_pipeline` runs (a), (b), (e) and (f) once more so
that the final action is scored and emitted as a terminal transition.
"""
from dataclasses import dataclass, field

import numpy as np

from ._validation import ConfigurationError, check_positive
from .belief import OneHotGoal, ReverseKL, concat_beliefs, divergence_to_goal


@dataclass
class ShapingConfig:
    """Legibility weight, divergence and which agents get shaped."""

    beta: float = 0.0
    mode: object = field(default_factory=ReverseKL)
    shaped_agents: frozenset = frozenset()
    omega: dict = field(default_factory=dict)

    def __post_init__(self):
        check_positive(self.beta, "beta", allow_zero=True)
        self.shaped_agents = frozenset(self.shaped_agents)


@dataclass(frozen=True)
class AugmentedObservation:
    """Observation, own-goal one-hot and beliefs about the others, in that order."""

    obs: np.ndarray
    own_goal: np.ndarray
    others_beliefs: np.ndarray

    @property
    def vector(self):
        return np.concatenate([self.obs, self.own_goal, self.others_beliefs])

    def __len__(self):
        return self.obs.size + self.own_goal.size + self.others_beliefs.size


@dataclass(frozen=True)
class ShapedTransition:
    agent: int
    s_aug: AugmentedObservation
    action: int
    s_aug_next: AugmentedObservation
    reward_shaped: float
    reward_raw: float
    klg: float
    done: bool
    action_next: int = -1


def augment(obs, goal, beliefs, n_goals=None):
    """Concatenate observation, goal one-hot and beliefs about other agents.

    ``goal`` may be a OneHotGoal or an int; ``n_goals`` is needed for ints.
    """
    obs = np.asarray(obs, dtype=float).ravel()
    if isinstance(goal, OneHotGoal):
        g = goal.vector()
    else:
        if n_goals is None:
            raise ConfigurationError("n_goals is required when goal is an index")
        g = OneHotGoal(int(goal), n_goals).vector()
    bel = concat_beliefs(beliefs)
    if bel.size % g.size:
        raise ConfigurationError("belief block length is not a multiple of |G|")
    return AugmentedObservation(obs, g, bel)


def shape_reward(raw, klg, beta):
    return raw + beta * klg


def estimate_goal(beliefs):
    """Argmax goal of the first belief, lowest index on ties."""
    return int(np.argmax(np.asarray(beliefs[0])))


@dataclass
class EpisodeMemory:
    """What the pipeline carries from one step to the next."""

    t: int = 0
    done: bool = False
    augs: list = None
    actions: list = None
    rewards: list = None
    rec_keys: dict = None
    self_div: dict = None


@dataclass
class StepOutput:
    t: int
    transitions: list
    klg: dict
    actions: list
    rewards: list
    done: bool
    snapshots: list = field(default_factory=list)


def _observe_beliefs(agent_id, agents, recognizers):
    return [recognizers[(agent_id, j)].belief for j in agents[agent_id].observes]


def _augmented(world, agent_id, agents, recognizers, n_goals):
    beliefs = _observe_beliefs(agent_id, agents, recognizers)
    agent = agents[agent_id]
    # an agent may carry a goal for scoring that its policy must not see
    goal = agent.goal if getattr(agent, "knows_goal", True) else None
    if goal is None:
        if not beliefs:
            raise ConfigurationError(f"agent {agent_id} has neither a goal nor observations")
        goal = estimate_goal(beliefs)
    return augment(world.observe(agent_id), goal, beliefs, n_goals)


def _recognize(memory, recognizers):
    for (i, j), rec in recognizers.items():
        rec.step(memory.rec_keys[j], memory.actions[j])
    return {pair: rec.belief for pair, rec in recognizers.items()}


def _self_divergences(agents, self_estimators, config):
    out = {}
    for i in config.shaped_agents:
        b = self_estimators[i].estimate()
        out[i] = divergence_to_goal(b, agents[i].goal, config.mode)
    return out


def _emit(memory, augs_now, new_div, agents, config, done, actions_next):
    transitions = []
    klg = {}
    for i in range(len(agents)):
        gain = 0.0
        if i in config.shaped_agents:
            gain = memory.self_div[i] - new_div[i]
        klg[i] = gain
        raw = memory.rewards[i]
        shaped = shape_reward(raw, gain, config.beta) if i in config.shaped_agents else raw
        transitions.append(ShapedTransition(
            i, memory.augs[i], memory.actions[i], augs_now[i], shaped, raw, gain, done,
            -1 if actions_next is None else actions_next[i]))
    return transitions, klg


def step_pipeline(world, agents, recognizers, self_estimators, config, memory):
    """Advance one synchronized time step.

    Parameters
    ----------
    world : object
        Needs ``observe(i)``, ``recognition_key(j)`` and ``step(actions)``
        returning ``(rewards, done)``; ``n_goals`` gives |G|.
    agents : list
        Each agent has ``goal`` (int or None), ``observes`` (ids it tracks)
        and ``act(aug)`` returning an action index.  An agent with
        ``knows_goal = False`` is scored against ``goal`` but acts on its
        estimate, like an agent without a goal.
    recognizers : dict
        ``(observer, observed) -> Recognizer``.
    self_estimators : dict
        ``agent -> SelfBeliefEstimator`` for every shaped agent.
    config : ShapingConfig
    memory : EpisodeMemory
        Mutated in place; start each episode with a fresh one.

    Returns
    -------
    StepOutput
        Transitions for the previous actions (empty on the first step), plus
        the terminal transitions when the world reports done.  ``snapshots``
        holds the recognizer beliefs after every recognition pass.
    """
    if memory.done:
        return StepOutput(memory.t, [], {}, [], [], True)
    for i in config.shaped_agents:
        if i not in self_estimators or agents[i].goal is None:
            raise ConfigurationError(f"shaped agent {i} needs a goal and observers")
    n_goals = world.n_goals
    t = memory.t
    snapshots = []
    # (a) recognizers consume the previous joint action
    if t > 0:
        snapshots.append(_recognize(memory, recognizers))
    # (b) self-beliefs
    div_now = _self_divergences(agents, self_estimators, config)
    # (c) act on augmented observations built from post-update beliefs
    augs = [_augmented(world, i, agents, recognizers, n_goals) for i in range(len(agents))]
    actions = [int(agents[i].act(augs[i])) for i in range(len(agents))]
    rec_keys = {j: world.recognition_key(j) for (_, j) in recognizers}
    # (d) environment
    rewards, done = world.step(actions)
    # (e)-(f) score and emit the previous actions
    transitions = []
    klg = {i: 0.0 for i in range(len(agents))}
    if t > 0:
        transitions, klg = _emit(memory, augs, div_now, agents, config, False, actions)
    memory.augs, memory.actions, memory.rewards = augs, actions, list(rewards)
    memory.rec_keys, memory.self_div = rec_keys, div_now
    memory.t = t + 1
    if done:
        snapshots.append(_recognize(memory, recognizers))
        div_end = _self_divergences(agents, self_estimators, config)
        augs_end = [_augmented(world, i, agents, recognizers, n_goals)
                    for i in range(len(agents))]
        final, klg_end = _emit(memory, augs_end, div_end, agents, config, True, None)
        transitions = transitions + final
        memory.done = True
        return StepOutput(t, transitions, {"previous": klg, "final": klg_end},
                          actions, list(rewards), True, snapshots)
    return StepOutput(t, transitions, {"previous": klg}, actions, list(rewards), False,
                      snapshots)
