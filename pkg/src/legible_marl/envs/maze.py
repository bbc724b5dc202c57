"""Lead-follow maze: a leader with a private target exit and a follower.

Cells are addressed as (x, y) with x the column and y the row, origin at
the top-left corner of the map file.  Flat cell ids are ``y * width + x``.
"""
import hashlib
from collections import deque
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from .._validation import ConfigurationError

ACTIONS = ("up", "down", "left", "right", "stay")
UP, DOWN, LEFT, RIGHT, STAY = range(5)
DELTAS = ((0, -1), (0, 1), (-1, 0), (1, 0), (0, 0))
EXIT_LABELS = ("A", "B", "C", "D")
MOVE_COST = -0.1
SUCCESS_BONUS = 1.0
NO_ACTION = -1
LEADER, FOLLOWER = 0, 1
DEFAULT_MAP = "lfm_v1.txt"


class MazeMap:
    """Parsed wall layout with exits and start cells.

    The text format is one row per line using ``#`` for walls, ``.`` for
    free cells, ``A``-``D`` for exits and ``L``/``F`` for the start cells.
    """

    def __init__(self, text, name="<string>"):
        rows = [r for r in text.splitlines() if r.strip()]
        if not rows:
            raise ConfigurationError(f"{name}: empty map")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ConfigurationError(f"{name}: ragged rows")
        self.name = name
        self.text = "\n".join(rows) + "\n"
        self.width, self.height = width, len(rows)
        self.free = np.zeros((self.height, self.width), dtype=bool)
        self.exits = {}
        starts = {}
        for y, row in enumerate(rows):
            for x, c in enumerate(row):
                if c not in "#.ABCDLF":
                    raise ConfigurationError(f"{name}: bad character {c!r} at ({x},{y})")
                self.free[y, x] = c != "#"
                if c in EXIT_LABELS:
                    if c in self.exits:
                        raise ConfigurationError(f"{name}: exit {c} appears twice")
                    self.exits[c] = (x, y)
                elif c in "LF":
                    if c in starts:
                        raise ConfigurationError(f"{name}: start {c} appears twice")
                    starts[c] = (x, y)
        if sorted(self.exits) != list(EXIT_LABELS):
            raise ConfigurationError(f"{name}: need exactly the exits A-D")
        if sorted(starts) != ["F", "L"]:
            raise ConfigurationError(f"{name}: need one L and one F start cell")
        self.leader_start = starts["L"]
        self.follower_start = starts["F"]
        self.n_cells = self.width * self.height
        self.next_cell = self._transition_table()

    @classmethod
    def load(cls, path=None):
        if path is None:
            text = resources.files("legible_marl.envs.maps").joinpath(DEFAULT_MAP).read_text()
            return cls(text, DEFAULT_MAP)
        with open(path, encoding="utf-8") as fh:
            return cls(fh.read(), str(path))

    @property
    def sha256(self):
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    def cell(self, xy):
        return xy[1] * self.width + xy[0]

    def xy(self, cell):
        return (int(cell) % self.width, int(cell) // self.width)

    def exit_cells(self):
        return np.array([self.cell(self.exits[k]) for k in EXIT_LABELS], dtype=np.int64)

    def is_free(self, xy):
        x, y = xy
        return 0 <= x < self.width and 0 <= y < self.height and bool(self.free[y, x])

    def move(self, xy, action):
        dx, dy = DELTAS[action]
        nxt = (xy[0] + dx, xy[1] + dy)
        return nxt if self.is_free(nxt) else xy

    def _transition_table(self):
        table = np.zeros((self.n_cells, len(ACTIONS)), dtype=np.int64)
        for c in range(self.n_cells):
            xy = self.xy(c)
            for a in range(len(ACTIONS)):
                table[c, a] = self.cell(self.move(xy, a))
        return table

    def distances_from(self, xy):
        """BFS step counts from ``xy`` to every free cell (-1 if unreachable)."""
        dist = np.full((self.height, self.width), -1, dtype=np.int64)
        if not self.is_free(xy):
            return dist
        dist[xy[1], xy[0]] = 0
        q = deque([xy])
        while q:
            cur = q.popleft()
            for a in range(4):
                nxt = self.move(cur, a)
                if nxt != cur and dist[nxt[1], nxt[0]] < 0:
                    dist[nxt[1], nxt[0]] = dist[cur[1], cur[0]] + 1
                    q.append(nxt)
        return dist


@dataclass(frozen=True)
class MazeWorld:
    """Complete maze state for one episode."""

    layout: MazeMap
    leader_pos: tuple
    follower_pos: tuple
    target_exit: str
    step_count: int = 0
    max_steps: int = 50
    last_actions: tuple = (NO_ACTION, NO_ACTION)
    done: bool = False
    success: bool = False

    @property
    def target_index(self):
        return EXIT_LABELS.index(self.target_exit)

    def state_cells(self):
        return (self.layout.cell(self.leader_pos), self.layout.cell(self.follower_pos))


def maze_reset(seed=None, target="A", layout=None, max_steps=50):
    """Fresh episode with canonical start cells.

    The start is fully determined by the layout; ``seed`` is accepted for a
    uniform environment interface.
    """
    if target not in EXIT_LABELS:
        raise ConfigurationError(f"target must be one of {EXIT_LABELS}, got {target!r}")
    layout = MazeMap.load() if layout is None else layout
    return MazeWorld(layout, layout.leader_start, layout.follower_start, target,
                     max_steps=max_steps)


def maze_step(world, joint):
    """Apply a (leader, follower) action pair.

    Returns ``(new_world, (r_leader, r_follower), done)``.
    """
    if world.done:
        raise ConfigurationError("episode already finished; reset first")
    a_l, a_f = (int(a) for a in joint)
    for a in (a_l, a_f):
        if not 0 <= a < len(ACTIONS):
            raise ConfigurationError(f"invalid maze action {a}")
    lay = world.layout
    lp = lay.move(world.leader_pos, a_l)
    fp = lay.move(world.follower_pos, a_f)
    r_l = MOVE_COST if a_l != STAY else 0.0
    r_f = MOVE_COST if a_f != STAY else 0.0
    target = lay.exits[world.target_exit]
    success = lp == target and fp == target
    if success:
        r_l += SUCCESS_BONUS
        r_f += SUCCESS_BONUS
    steps = world.step_count + 1
    done = success or steps >= world.max_steps
    new = replace(world, leader_pos=lp, follower_pos=fp, step_count=steps,
                  last_actions=(a_l, a_f), done=done, success=success)
    return new, (r_l, r_f), done


def maze_observe(world, agent):
    """Both agents' coordinates and the other agent's previous action.

    The leader's observation additionally ends with a one-hot of its target.
    """
    other = FOLLOWER if agent == LEADER else LEADER
    obs = [*world.leader_pos, *world.follower_pos, world.last_actions[other]]
    if agent == LEADER:
        onehot = [0.0] * len(EXIT_LABELS)
        onehot[world.target_index] = 1.0
        obs += onehot
    return np.asarray(obs, dtype=float)


def world_to_row(world):
    """Flat record for trace export."""
    return {"step": world.step_count, "leader_x": world.leader_pos[0],
            "leader_y": world.leader_pos[1], "follower_x": world.follower_pos[0],
            "follower_y": world.follower_pos[1], "target": world.target_exit,
            "leader_action": world.last_actions[0],
            "follower_action": world.last_actions[1], "done": int(world.done)}


class LeadFollowMaze:
    """Mutable wrapper that the step pipeline drives."""

    n_agents = 2
    n_goals = len(EXIT_LABELS)
    n_actions = len(ACTIONS)

    def __init__(self, layout=None, max_steps=50):
        self.layout = MazeMap.load() if layout is None else layout
        self.max_steps = max_steps
        self.world = None

    def reset(self, target_index):
        self.world = maze_reset(None, EXIT_LABELS[target_index], self.layout, self.max_steps)
        return self.world

    def observe(self, agent):
        return maze_observe(self.world, agent)

    def state_key(self):
        lc, fc = self.world.state_cells()
        return lc * self.layout.n_cells + fc

    def recognition_key(self, agent):
        # the follower keys the leader's actions on the full joint position
        return self.state_key()

    def step(self, actions):
        self.world, rewards, done = maze_step(self.world, actions)
        return rewards, done
