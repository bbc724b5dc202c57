"""Particle navigation: three point agents, six landmarks, static obstacles.

Agent 0 is told the target landmark.  Agent 1 only sees agent 0 and agent 2
only sees agent 1, so the target has to travel down that chain through the
agents' movements.  Everybody is rewarded for getting close to the target.
"""
import math
from dataclasses import dataclass, field, replace

import numba as nb
import numpy as np

from .._validation import ConfigurationError, check_int, check_positive

N_AGENTS = 3
N_LANDMARKS = 6
# discrete force basis: +x, -x, +y, -y, none
FORCE_BASIS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.0, 0.0]])
HEADING_SECTORS = 8


def _hexagon(radius):
    ang = np.arange(N_LANDMARKS) * (2 * np.pi / N_LANDMARKS)
    return np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)


CANONICAL_LANDMARKS = _hexagon(0.7)
CANONICAL_OBSTACLES = ((0.0, 0.0, 0.2), (0.0, 0.5, 0.08), (0.0, -0.5, 0.08))


@dataclass(frozen=True)
class ParticleConfig:
    dt: float = 0.1
    damping: float = 0.25
    mass: float = 1.0
    max_speed: float = 1.0
    max_force: float = 1.0
    radius: float = 0.05
    arena: float = 1.0
    capture_radius: float = 0.1
    success_bonus: float = 5.0
    max_steps: int = 100

    def __post_init__(self):
        check_positive(self.dt, "dt")
        if not 0.0 <= self.damping < 1.0:
            raise ConfigurationError("damping must lie in [0, 1)")
        check_positive(self.mass, "mass")
        check_positive(self.max_speed, "max_speed")
        check_positive(self.max_force, "max_force")
        check_positive(self.radius, "radius")
        check_positive(self.arena, "arena")
        check_positive(self.capture_radius, "capture_radius")
        check_int(self.max_steps, "max_steps", 1)

    def physics(self):
        return np.array([self.dt, self.damping, self.mass, self.max_speed, self.max_force,
                         self.radius, self.arena])


@dataclass(frozen=True)
class ObservationChain:
    """observer -> observed agent."""

    links: tuple = ((1, 0), (2, 1))

    def __post_init__(self):
        seen = dict(self.links)
        for start in seen:
            cur, hops = start, 0
            while cur in seen:
                cur = seen[cur]
                hops += 1
                if hops > len(seen):
                    raise ConfigurationError("observation chain has a cycle")

    def observed_by(self, observer):
        return dict(self.links).get(observer)

    def observers_of(self, agent):
        return [o for o, t in self.links if t == agent]


@nb.njit(cache=True)
def _clamp_norm(x, y, limit):
    n = math.sqrt(x * x + y * y)
    if n > limit:
        s = limit / n
        return x * s, y * s
    return x, y


@nb.njit(cache=True)
def integrate(pos, vel, forces, obstacles, phys):
    """Advance every agent one step in place.

    Semi-implicit Euler with linear damping, a speed clamp, a square arena
    and circular obstacles resolved by projection onto their surface.
    """
    dt, damping, mass, max_speed, max_force, radius, arena = (
        phys[0], phys[1], phys[2], phys[3], phys[4], phys[5], phys[6])
    lim = arena - radius
    for i in range(pos.shape[0]):
        fx, fy = _clamp_norm(forces[i, 0], forces[i, 1], max_force)
        vx = (1.0 - damping) * vel[i, 0] + (fx / mass) * dt
        vy = (1.0 - damping) * vel[i, 1] + (fy / mass) * dt
        vx, vy = _clamp_norm(vx, vy, max_speed)
        px = pos[i, 0] + vx * dt
        py = pos[i, 1] + vy * dt
        if px > lim:
            px = lim
            vx = 0.0
        elif px < -lim:
            px = -lim
            vx = 0.0
        if py > lim:
            py = lim
            vy = 0.0
        elif py < -lim:
            py = -lim
            vy = 0.0
        for k in range(obstacles.shape[0]):
            cx, cy, cr = obstacles[k, 0], obstacles[k, 1], obstacles[k, 2]
            dx = px - cx
            dy = py - cy
            d = math.sqrt(dx * dx + dy * dy)
            reach = cr + radius
            if d < reach:
                if d > 0.0:
                    nx, ny = dx / d, dy / d
                else:
                    nx, ny = 1.0, 0.0
                px = cx + nx * reach
                py = cy + ny * reach
                vn = vx * nx + vy * ny
                vx -= vn * nx
                vy -= vn * ny
        pos[i, 0] = px
        pos[i, 1] = py
        vel[i, 0] = vx
        vel[i, 1] = vy


@nb.njit(cache=True)
def team_rewards(pos, target_xy, capture, bonus, out):
    """Dense distance cost per agent plus a shared bonus; returns success."""
    all_in = True
    for i in range(pos.shape[0]):
        dx = pos[i, 0] - target_xy[0]
        dy = pos[i, 1] - target_xy[1]
        d = math.sqrt(dx * dx + dy * dy)
        out[i] = -d
        if d > capture:
            all_in = False
    if all_in:
        for i in range(pos.shape[0]):
            out[i] += bonus
    return all_in


@nb.njit(cache=True)
def spawn(rng, n, obstacles, radius, arena, out):
    """Uniform positions inside the arena, rejecting obstacle overlaps."""
    lim = arena - radius
    for i in range(n):
        while True:
            x = -lim + rng.random() * (2.0 * lim)
            y = -lim + rng.random() * (2.0 * lim)
            ok = True
            for k in range(obstacles.shape[0]):
                dx = x - obstacles[k, 0]
                dy = y - obstacles[k, 1]
                if math.sqrt(dx * dx + dy * dy) < obstacles[k, 2] + radius:
                    ok = False
                    break
            if ok:
                break
        out[i, 0] = x
        out[i, 1] = y


@dataclass(frozen=True)
class ParticleWorld:
    pos: np.ndarray
    vel: np.ndarray
    landmarks: np.ndarray
    obstacles: np.ndarray
    target: int
    config: ParticleConfig = field(default_factory=ParticleConfig)
    step_count: int = 0
    last_forces: np.ndarray = None
    last_actions: tuple = (-1, -1, -1)
    done: bool = False
    success: bool = False


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def nav_reset(seed, target, config=None, landmarks=None, obstacles=None):
    """New episode: agents spawn uniformly outside obstacles, at rest."""
    config = ParticleConfig() if config is None else config
    if not 0 <= int(target) < N_LANDMARKS:
        raise ConfigurationError(f"target must be in [0, {N_LANDMARKS}), got {target}")
    lm = CANONICAL_LANDMARKS if landmarks is None else np.asarray(landmarks, dtype=float)
    ob = np.asarray(CANONICAL_OBSTACLES if obstacles is None else obstacles,
                    dtype=float).reshape(-1, 3)
    pos = np.zeros((N_AGENTS, 2))
    spawn(_rng(seed), N_AGENTS, ob, config.radius, config.arena, pos)
    return ParticleWorld(pos, np.zeros((N_AGENTS, 2)), lm.copy(), ob.copy(), int(target),
                         config, 0, np.zeros((N_AGENTS, 2)))


def nav_step(world, forces):
    """Apply one force per agent; returns ``(world', rewards, done)``."""
    if world.done:
        raise ConfigurationError("episode already finished; reset first")
    f = np.asarray(forces, dtype=float).reshape(N_AGENTS, 2)
    if not np.all(np.isfinite(f)):
        raise ConfigurationError("forces must be finite")
    cfg = world.config
    pos, vel = world.pos.copy(), world.vel.copy()
    integrate(pos, vel, f, world.obstacles, cfg.physics())
    rewards = np.zeros(N_AGENTS)
    success = team_rewards(pos, world.landmarks[world.target], cfg.capture_radius,
                           cfg.success_bonus, rewards)
    steps = world.step_count + 1
    done = bool(success) or steps >= cfg.max_steps
    clamped = np.array([_clamp_norm(fx, fy, cfg.max_force) for fx, fy in f])
    new = replace(world, pos=pos, vel=vel, step_count=steps, last_forces=clamped,
                  done=done, success=bool(success))
    return new, rewards, done


def nav_observe(world, agent, chain=None):
    """Own state, landmark and obstacle offsets, chain partner, and (agent 0) the target."""
    chain = ObservationChain() if chain is None else chain
    p, v = world.pos[agent], world.vel[agent]
    parts = [p, v, (world.landmarks - p).ravel(), (world.obstacles[:, :2] - p).ravel()]
    partner = chain.observed_by(agent)
    if partner is not None:
        parts += [world.pos[partner], world.last_forces[partner]]
    if agent == 0:
        onehot = np.zeros(N_LANDMARKS)
        onehot[world.target] = 1.0
        parts.append(onehot)
    return np.concatenate(parts)


@nb.njit(cache=True)
def heuristic_q(px, py, vx, vy, landmarks, phys, out):
    """Goal-conditioned action values used by the recognizer.

    ``out[k, a]`` is minus the distance to landmark ``k`` after applying
    force ``a`` for one step (obstacles ignored), in units of the largest
    single-step displacement a force can cause.
    """
    dt, damping, mass, max_speed, max_force = phys[0], phys[1], phys[2], phys[3], phys[4]
    scale = max_force / mass * dt * dt
    for a in range(5):
        fx = FORCE_BASIS[a, 0] * max_force
        fy = FORCE_BASIS[a, 1] * max_force
        nvx = (1.0 - damping) * vx + (fx / mass) * dt
        nvy = (1.0 - damping) * vy + (fy / mass) * dt
        nvx, nvy = _clamp_norm(nvx, nvy, max_speed)
        nx = px + nvx * dt
        ny = py + nvy * dt
        for k in range(landmarks.shape[0]):
            dx = nx - landmarks[k, 0]
            dy = ny - landmarks[k, 1]
            out[k, a] = -math.sqrt(dx * dx + dy * dy) / scale



def heading_sector(vx, vy):
    """Quantise the velocity direction into one of eight sectors."""
    ang = math.atan2(vy, vx) % (2 * math.pi)
    return int(ang / (2 * math.pi / HEADING_SECTORS)) % HEADING_SECTORS


class SimpleNavigation:
    """Mutable wrapper over :class:`ParticleWorld` for the step pipeline.

    Discrete actions index :data:`FORCE_BASIS` scaled by ``max_force``.
    ``key_mode`` picks what :meth:`recognition_key` returns: ``"state"``
    gives the observed agent's (x, y, vx, vy), ``"grid"`` a (cell, heading)
    pair for count-based recognizers.
    """

    n_agents = N_AGENTS
    n_goals = N_LANDMARKS
    n_actions = len(FORCE_BASIS)

    def __init__(self, config=None, chain=None, key_mode="state", grid=8):
        self.config = ParticleConfig() if config is None else config
        self.chain = ObservationChain() if chain is None else chain
        if key_mode not in ("state", "grid"):
            raise ConfigurationError(f"unknown key_mode {key_mode!r}")
        self.key_mode = key_mode
        self.grid = grid
        self.world = None

    def reset(self, rng, target):
        self.world = nav_reset(rng, target, self.config)
        return self.world

    def observe(self, agent):
        return nav_observe(self.world, agent, self.chain)

    def recognition_key(self, agent):
        p, v = self.world.pos[agent], self.world.vel[agent]
        if self.key_mode == "state":
            return (float(p[0]), float(p[1]), float(v[0]), float(v[1]))
        a = self.config.arena
        cx = min(int((p[0] + a) / (2 * a) * self.grid), self.grid - 1)
        cy = min(int((p[1] + a) / (2 * a) * self.grid), self.grid - 1)
        return (cy * self.grid + cx, heading_sector(v[0], v[1]))

    def forces(self, actions):
        return FORCE_BASIS[np.asarray(actions, dtype=np.int64)] * self.config.max_force

    def step(self, actions):
        self.world, rewards, done = nav_step(self.world, self.forces(actions))
        self.world = replace(self.world, last_actions=tuple(int(a) for a in actions))
        return [float(r) for r in rewards], done
