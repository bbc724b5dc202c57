"""Acceptance criteria C1-C10 as callable checks.

Each check returns a :class:`Result` carrying the measured values.  The
desk-scale training runs behind C5-C7 are shared through a cache.
"""
import filecmp
import math
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
from sklearn.base import clone

from ..belief import EPS_FLOOR, ReverseKL, SmoothedForwardKL, divergence_to_goal, kl_gain
from ..envs.maze import MazeMap
from ..envs.particle import CANONICAL_OBSTACLES, ParticleConfig, integrate
from ..learners import LearnerConfig
from ..maze_training import (MazeFastTrainer, MazeRunSettings, run_maze_bypass,
                             run_maze_reference)
from ..metrics import EpisodeRecord, pcr, ptr
from ..recognition import (DEGENERATE_NORMALIZER, EmpiricalPolicyModel,
                           StateConsistentRecognizer, bayes_update)
from .config import ExperimentConfig
from .runner import run_cell

BETAS = (0.0, 0.01, 0.1)
SEEDS = (1, 2, 3, 4, 5)
MAZE_WINDOW = 5000
NAV_WINDOW = 1000


@dataclass
class Result:
    cid: str
    title: str
    passed: bool
    measured: str
    seconds: float = 0.0

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.cid} {self.title}: {self.measured} ({self.seconds:.1f} s)"


def _timed(fn=None, limit=None):
    """Record wall time; with ``limit`` (seconds) a slow run fails the check."""
    if fn is None:
        return lambda f: _timed(f, limit)

    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        if limit is not None and res.seconds >= limit:
            res.passed = False
            res.measured += f"; over the {limit:g} s budget"
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def exact_posterior(prior, likelihood):
    """Brute-force posterior in rational arithmetic, floored like the float path.

    A normaliser below the degenerate threshold returns the prior.
    """
    terms = [Fraction(float(p)) * Fraction(float(q)) for p, q in zip(prior, likelihood)]
    z = sum(terms)
    if z < Fraction(DEGENERATE_NORMALIZER):
        return [Fraction(float(p)) for p in prior]
    floor = Fraction(EPS_FLOOR)
    return [max(t / z, floor) for t in terms]


@_timed(limit=5)
def c1_bayes_oracle(n=1000, seed=11):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        G = int(rng.integers(2, 7))
        prior = rng.dirichlet(np.full(G, rng.uniform(0.2, 3.0)))
        prior = prior / prior.sum()
        lik = rng.uniform(0.0, 1.0, G) ** rng.uniform(0.5, 8.0)
        post = np.asarray(bayes_update(prior, lik))
        ref = exact_posterior(prior, lik)
        worst = max(worst, max(abs(Fraction(float(a)) - b) for a, b in zip(post, ref)))
    err = float(worst)
    return Result("C1", "Bayes oracle equivalence", err <= 1e-9,
                  f"max |err| {err:.3g} over {n} instances")


@_timed(limit=5)
def c2_telescoping(n=1000, seed=12):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n):
        G = int(rng.integers(2, 7))
        L = int(rng.integers(2, 101))
        seq = rng.dirichlet(np.full(G, rng.uniform(0.1, 2.0)), size=L)
        seq = np.maximum(seq, 1e-300)
        seq /= seq.sum(axis=1, keepdims=True)
        g = int(rng.integers(G))
        mode = ReverseKL() if i % 2 == 0 else SmoothedForwardKL(1e-6)
        total = 0.0
        for t in range(1, L):
            total += kl_gain(seq[t - 1], seq[t], g, mode)
        direct = divergence_to_goal(seq[0], g, mode) - divergence_to_goal(seq[-1], g, mode)
        worst = max(worst, abs(total - direct))
    ok = worst <= 1e-9
    return Result("C2", "telescoping KLG", ok, f"max |sum klg - (D0 - DT)| {worst:.3g}")


def maze_loops(layout, start, max_len=6):
    """Every leader action sequence of length <= ``max_len`` that ends where it began.

    Yields the visited cell sequences (start ... start).
    """
    nxt = layout.next_cell

    def walk(path):
        if len(path) > 1 and path[-1] == start:
            yield tuple(path)
        if len(path) - 1 == max_len:
            return
        for a in range(nxt.shape[1]):
            path.append(int(nxt[path[-1], a]))
            yield from walk(path)
            path.pop()

    yield from walk([start])


@_timed(limit=60)
def c3_loop_property(n_states=20, max_len=6, seed=13):
    layout = MazeMap.load()
    rng = np.random.default_rng(seed)
    C = layout.n_cells
    free = [c for c in range(C) if layout.is_free(layout.xy(c))]
    model = EmpiricalPolicyModel(4, 5)
    for lc in free:
        for fc in free:
            model.counts[lc * C + fc] = rng.integers(0, 20, size=(4, 5))
    rec = StateConsistentRecognizer(model)
    gammas = (0.5, 0.9, 0.99)
    n_loops, worst_zero, worst_bound = 0, 0.0, -math.inf
    for i in range(n_states):
        l0, f0 = (int(c) for c in rng.choice(free, size=2, replace=False))
        g = int(rng.integers(4))
        mode = ReverseKL() if i % 2 == 0 else SmoothedForwardKL(1e-6)
        div = {}

        def D(cell):
            if cell not in div:
                div[cell] = divergence_to_goal(rec.belief_at(cell * C + f0), g, mode)
            return div[cell]

        for path in maze_loops(layout, l0, max_len):
            n_loops += 1
            terms = [D(path[k]) - D(path[k + 1]) for k in range(len(path) - 1)]
            total = 0.0
            for x in terms:
                total += x
            worst_zero = max(worst_zero, abs(total))
            for gam in gammas:
                disc = 0.0
                for k, x in enumerate(terms):
                    disc += gam ** k * x
                worst_bound = max(worst_bound, disc - D(path[0]))
    ok = worst_zero <= 1e-9 and worst_bound <= 1e-9
    msg = (f"{n_loops} loops; max |bonus| at gamma=1 {worst_zero:.3g}; "
           f"max discounted bonus - D0 {worst_bound:.3g}")
    return Result("C3", "loop property", ok, msg)


@_timed
def c4_metric_fixtures():
    rng = np.random.default_rng(14)
    right = np.array([0.7, 0.1, 0.1, 0.1])
    wrong = np.array([0.1, 0.7, 0.1, 0.1])
    flags = np.zeros(1000, dtype=bool)
    flags[rng.choice(1000, 415, replace=False)] = True
    records = [EpisodeRecord(np.stack([np.full(4, 0.25), right if f else wrong]), 0)
               for f in flags]
    p = pcr(records)
    beliefs = np.array([wrong] * 15 + [right] * 36)
    t = ptr(EpisodeRecord(beliefs, 0))
    ok = p == 0.415 and t == 0.3
    return Result("C4", "metric fixtures", ok, f"PCR {p!r} (want 0.415), PTR {t!r} (want 0.3)")


def _fit(base, beta, seed):
    est = clone(base).set_params(beta=beta, seed=seed)
    return est.fit().history_


@lru_cache(maxsize=None)
def maze_desk_runs(preset="lfm_desk"):
    """Final-window means per (beta, seed): dict of arrays (seeds,) per metric."""
    cfg = ExperimentConfig.load(preset, betas=list(BETAS), seeds=list(SEEDS))
    base = cfg.estimator()
    t0 = time.perf_counter()
    out = {}
    for beta in BETAS:
        h = [_fit(base, beta, s)[-MAZE_WINDOW:] for s in SEEDS]
        out[beta] = {"reward": np.array([x[:, 0].mean() for x in h]),
                     "ptr": np.array([x[:, 3].mean() for x in h]),
                     "pcr": np.array([x[:, 4].mean() for x in h]),
                     "success": np.array([x[:, 2].mean() for x in h])}
    out["seconds"] = time.perf_counter() - t0
    return out


def _fmt(a):
    return "[" + " ".join(f"{x:.3f}" for x in a) + "]"


@_timed
def c5_trend():
    r = maze_desk_runs()
    p, t = ({b: r[b][k] for b in BETAS} for k in ("pcr", "ptr"))
    counts = {
        "pcr(.1)>pcr(.01)": int(np.sum(p[0.1] > p[0.01])),
        "pcr(.01)>pcr(0)": int(np.sum(p[0.01] > p[0.0])),
        "ptr(.1)<ptr(.01)": int(np.sum(t[0.1] < t[0.01])),
        "ptr(.01)<ptr(0)": int(np.sum(t[0.01] < t[0.0])),
    }
    means_ok = (p[0.1].mean() > p[0.01].mean() > p[0.0].mean()
                and t[0.1].mean() < t[0.01].mean() < t[0.0].mean())
    ok = means_ok and all(v >= 4 for v in counts.values()) and r["seconds"] <= 20 * 60
    msg = (f"PCR means {_fmt([p[b].mean() for b in BETAS])}, "
           f"PTR means {_fmt([t[b].mean() for b in BETAS])} (beta 0, 0.01, 0.1), seeds holding "
           + ", ".join(f"{k} {v}/5" for k, v in counts.items())
           + f", training {r['seconds']:.0f} s")
    return Result("C5", "beta-monotone legibility trend", ok, msg)


@_timed
def c6_reward_gain():
    r = maze_desk_runs()
    lo, hi = r[0.0]["reward"], r[0.01]["reward"]
    n = int(np.sum(hi >= lo + 0.1))
    msg = f"reward beta=0 {_fmt(lo)}, beta=0.01 {_fmt(hi)}; {n}/5 seeds gain >= 0.1"
    return Result("C6", "reward improvement", n >= 4, msg)


@_timed
def c7_over_legibility():
    r = maze_desk_runs()
    m1, m2 = float(np.median(r[0.01]["reward"])), float(np.median(r[0.1]["reward"]))
    msg = f"median reward beta=0.01 {m1:.3f} vs beta=0.1 {m2:.3f}"
    return Result("C7", "over-legibility degradation", m1 >= m2, msg)


@_timed
def c8_bypass_identity(n_episodes=100, seed=1):
    mismatches = []
    for algo in ("q_learning", "sarsa"):
        kw = dict(episodes=n_episodes, seed=seed, algo=algo,
                  learner=LearnerConfig(alpha=0.5, gamma=0.99))
        ref_rows, _, ref_tr = run_maze_reference(MazeRunSettings(beta=0.0, **kw),
                                                 return_traces=True)
        by_rows, _, by_tr = run_maze_bypass(MazeRunSettings(beta=0.0, **kw))
        fast, traj = MazeFastTrainer(MazeRunSettings(beta=0.0, **kw), shaping=False).run(
            record_actions=True)
        fast_tr = [[tuple(int(v) for v in step) for step in ep if step[0] >= 0]
                   for ep in traj]
        if ref_tr != by_tr:
            mismatches.append(f"{algo}: pipeline vs bypass actions")
        if fast_tr != by_tr:
            mismatches.append(f"{algo}: compiled vs bypass actions")
        for a, b, f in zip(ref_rows, by_rows, fast):
            if a != b:
                mismatches.append(f"{algo}: pipeline vs bypass rows at episode {a.episode}")
                break
            fr = (b.return_raw, b.return_shaped, b.success, b.ptr, b.pred_correct, b.steps)
            if tuple(f[:6]) != fr:
                mismatches.append(f"{algo}: compiled vs bypass rows at episode {b.episode}")
                break
    ok = not mismatches
    msg = f"{n_episodes} episodes x 2 algos, " + ("bitwise identical" if ok else
                                                 "; ".join(mismatches))
    return Result("C8", "beta=0 behavioral identity", ok, msg)


def physics_checks(n_steps=10_000, seed=19):
    """Closed-form kinematics, obstacle non-penetration and the speed clamp."""
    rng = np.random.default_rng(seed)
    # 1) constant force, no damping, no clamp, nothing to hit
    free = ParticleConfig(damping=0.0, max_speed=1e9, arena=1e9, max_force=1.0)
    phys = free.physics()
    none = np.zeros((0, 3))
    kin_err = 0.0
    steps = 0
    while steps < n_steps:
        p0 = rng.uniform(-1, 1, (3, 2))
        f = rng.uniform(-0.7, 0.7, (3, 2))
        pos, vel = p0.copy(), np.zeros((3, 2))
        for k in range(1, 101):
            integrate(pos, vel, f, none, phys)
            a = f / free.mass
            v_ref = k * a * free.dt
            p_ref = p0 + a * free.dt ** 2 * k * (k + 1) / 2
            kin_err = max(kin_err, float(np.abs(pos - p_ref).max()),
                          float(np.abs(vel - v_ref).max()))
            steps += 1
    # 2) canonical obstacles, with a speed cap low enough to bind often
    cfg = ParticleConfig(max_speed=0.3)
    phys = cfg.physics()
    obs = np.asarray(CANONICAL_OBSTACLES, dtype=float)
    pos = rng.uniform(-0.9, 0.9, (3, 2))
    pos[:, 0] = np.where(np.abs(pos[:, 0]) < 0.3, 0.6, pos[:, 0])
    vel = np.zeros((3, 2))
    worst_pen, worst_speed, binding = -math.inf, 0.0, 0
    for k in range(n_steps):
        if k % 20 == 0:
            # hold each push for a while so agents reach the cap
            forces = rng.normal(size=(3, 2)) * rng.uniform(0.5, 3)
        integrate(pos, vel, forces, obs, phys)
        d = np.sqrt(((pos[:, None, :] - obs[None, :, :2]) ** 2).sum(-1))
        worst_pen = max(worst_pen, float(((obs[:, 2] + cfg.radius)[None, :] - d).max()))
        speed = float(np.sqrt((vel ** 2).sum(1)).max())
        binding += speed > cfg.max_speed * (1 - 1e-9)
        worst_speed = max(worst_speed, speed)
    return kin_err, worst_pen, worst_speed, cfg.max_speed, binding


@lru_cache(maxsize=None)
def nav_desk_runs(preset="nav_desk", betas=(0.0, 0.01)):
    cfg = ExperimentConfig.load(preset, betas=list(betas), seeds=list(SEEDS))
    base = cfg.estimator()
    return {b: np.array([_fit(base, b, s)[-NAV_WINDOW:, 0].mean() for s in SEEDS])
            for b in betas}


@_timed
def c9_particles():
    t0 = time.perf_counter()
    kin_err, pen, speed, cap, binding = physics_checks()
    phys_s = time.perf_counter() - t0
    # speed clamp rescales by limit/norm, which can overshoot by an ulp
    phys_ok = kin_err <= 1e-9 and pen <= 1e-6 and speed <= cap * (1 + 1e-12) and phys_s < 10
    r = nav_desk_runs()
    n = int(np.sum(r[0.01] >= r[0.0]))
    ok = phys_ok and n >= 3
    msg = (f"kinematics err {kin_err:.3g}, max penetration {pen:.3g}, max speed {speed:.12g} "
           f"(cap {cap:g}, at cap on {binding} steps), physics {phys_s:.1f} s; tile_td final-window reward beta=0 "
           f"{_fmt(r[0.0])}, beta=0.01 {_fmt(r[0.01])}: {n}/5 seeds beta=0.01 >= beta=0")
    return Result("C9", "particle physics + navigation check", ok, msg)


@_timed
def c10_determinism():
    cells = [("lfm_desk", 0.01, 3, 1500, 700), ("nav_desk", 0.01, 2, 300, 128)]
    notes, ok = [], True
    with tempfile.TemporaryDirectory() as tmp:
        for preset, beta, seed, episodes, chunk in cells:
            paths = []
            for rep in ("a", "b"):
                cfg = ExperimentConfig.load(preset, betas=[beta], seeds=[seed],
                                            episodes=episodes)
                cfg.data["chunk"] = chunk
                paths.append(run_cell(cfg, beta, seed, Path(tmp) / rep / preset))
            same = filecmp.cmp(paths[0], paths[1], shallow=False)
            ok = ok and same
            notes.append(f"{preset} beta={beta} seed={seed} "
                         f"{'identical' if same else 'DIFFERENT'} "
                         f"({paths[0].stat().st_size} bytes)")
    return Result("C10", "determinism", ok, "; ".join(notes))


ALL = (c1_bayes_oracle, c2_telescoping, c3_loop_property, c4_metric_fixtures, c5_trend,
       c6_reward_gain, c7_over_legibility, c8_bypass_identity, c9_particles, c10_determinism)


def run_all(report=print):
    results = []
    for check in ALL:
        res = check()
        report(res.line())
        results.append(res)
    return results

