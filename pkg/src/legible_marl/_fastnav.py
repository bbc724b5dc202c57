"""Compiled navigation training loop with tile-coded TD learners.

Mirrors ``nav_training.run_nav_reference`` draw for draw.
"""
import math

import numba as nb
import numpy as np

from ._fastmaze import _argmax_low, _correct, _divergence, _select
from .envs.particle import FORCE_BASIS, heuristic_q, integrate, spawn, team_rewards

N_AGENTS = 3
N_GOALS = 6
N_ACTIONS = 5
OUT_COLS = 7


@nb.njit(cache=True)
def _maxent_update(b, px, py, vx, vy, a, landmarks, phys, beta_like, q):
    heuristic_q(px, py, vx, vy, landmarks, phys, q)
    G = b.shape[0]
    post = np.empty(G)
    z = 0.0
    for k in range(G):
        m = q[k, 0]
        for j in range(1, q.shape[1]):
            if q[k, j] > m:
                m = q[k, j]
        tot = 0.0
        for j in range(q.shape[1]):
            tot += math.exp(beta_like * (q[k, j] - m))
        lik = math.exp(beta_like * (q[k, a] - m)) / tot
        if lik < 1e-12:
            lik = 1e-12
        post[k] = lik * b[k]
        z += post[k]
    if z < 1e-300:
        return
    for k in range(G):
        b[k] = max(post[k] / z, 1e-12)


@nb.njit(cache=True)
def _features(pos, vel, i, k, landmarks, low, high, x):
    x[0] = landmarks[k, 0] - pos[i, 0]
    x[1] = landmarks[k, 1] - pos[i, 1]
    x[2] = vel[i, 0]
    x[3] = vel[i, 1]
    for d in range(4):
        if x[d] < low[d]:
            x[d] = low[d]
        elif x[d] > high[d]:
            x[d] = high[d]


@nb.njit(cache=True)
def _tiles(x, low, width, offsets, per_dim, tiling_size, idx):
    for t in range(offsets.shape[0]):
        flat = 0
        for d in range(x.shape[0]):
            c = int((x[d] - low[d] + offsets[t, d]) / width[d])
            flat = flat * per_dim + c
        idx[t] = t * tiling_size + flat


@nb.njit(cache=True)
def _q_all(w, idx, out):
    for a in range(w.shape[0]):
        tot = 0.0
        for i in range(idx.shape[0]):
            tot += w[a, idx[i]]
        out[a] = tot


@nb.njit(cache=True)
def _tile_td(w, idx, a, r, idx2, done, alpha, gamma, qbuf):
    if done:
        target = r
    else:
        _q_all(w, idx2, qbuf)
        m = qbuf[0]
        for j in range(1, qbuf.shape[0]):
            if qbuf[j] > m:
                m = qbuf[j]
        target = r + gamma * m
    q = 0.0
    for i in range(idx.shape[0]):
        q += w[a, idx[i]]
    delta = target - q
    step = (alpha / idx.shape[0]) * delta
    for i in range(idx.shape[0]):
        w[a, idx[i]] += step
        if not math.isfinite(w[a, idx[i]]):
            raise FloatingPointError("tile weights became non-finite")


@nb.njit(cache=True)
def train_chunk(W, rng_env, rng0, rng1, rng2, landmarks, obstacles, phys, capture, bonus,
                ep_start, ep_stop, n_episodes, max_steps, beta, es, shaping, beta_like,
                low, high, width, offsets, per_dim, tiling_size, alpha, gamma, eps_start,
                eps_end, eps_fraction, out):
    G = N_GOALS
    n_til = offsets.shape[0]
    pos = np.zeros((N_AGENTS, 2))
    vel = np.zeros((N_AGENTS, 2))
    forces = np.zeros((N_AGENTS, 2))
    rew = np.zeros(N_AGENTS)
    b1 = np.empty(G)
    b2 = np.empty(G)
    hist = np.zeros((max_steps + 1, G))
    q = np.zeros((G, N_ACTIONS))
    qbuf = np.zeros(N_ACTIONS)
    x = np.zeros(4)
    idx = np.zeros((N_AGENTS, n_til), np.int64)
    p_idx = np.zeros((N_AGENTS, n_til), np.int64)
    acts = np.zeros(N_AGENTS, np.int64)
    p_acts = np.zeros(N_AGENTS, np.int64)
    p_rew = np.zeros(N_AGENTS)
    p_state = np.zeros((2, 4))
    shaped = np.zeros(N_AGENTS)
    max_force = phys[4]
    for ep in range(ep_start, ep_stop):
        frac = ep / (eps_fraction * n_episodes)
        eps = eps_start - (eps_start - eps_end) * frac
        if not eps > eps_end:
            eps = eps_end
        g = int(rng_env.random() * G)
        spawn(rng_env, N_AGENTS, obstacles, phys[5], phys[6], pos)
        for i in range(N_AGENTS):
            vel[i, 0] = 0.0
            vel[i, 1] = 0.0
        for k in range(G):
            b1[k] = 1.0 / G
            b2[k] = 1.0 / G
        hist[0, :] = b1
        ret_raw = 0.0
        ret_shaped = 0.0
        success = 0
        p_div0 = 0.0
        p_div1 = 0.0
        t = 0
        while True:
            # (a) agent 1 watches agent 0, agent 2 watches agent 1
            if t > 0:
                _maxent_update(b1, p_state[0, 0], p_state[0, 1], p_state[0, 2],
                               p_state[0, 3], p_acts[0], landmarks, phys, beta_like, q)
                _maxent_update(b2, p_state[1, 0], p_state[1, 1], p_state[1, 2],
                               p_state[1, 3], p_acts[1], landmarks, phys, beta_like, q)
                hist[t, :] = b1
            # (b) self-beliefs of the two shaped agents
            div0 = _divergence(b1, g, es) if shaping else 0.0
            div1 = _divergence(b2, g, es) if shaping else 0.0
            # (c) act
            _features(pos, vel, 0, g, landmarks, low, high, x)
            _tiles(x, low, width, offsets, per_dim, tiling_size, idx[0])
            _features(pos, vel, 1, _argmax_low(b1), landmarks, low, high, x)
            _tiles(x, low, width, offsets, per_dim, tiling_size, idx[1])
            _features(pos, vel, 2, _argmax_low(b2), landmarks, low, high, x)
            _tiles(x, low, width, offsets, per_dim, tiling_size, idx[2])
            _q_all(W[0], idx[0], qbuf)
            acts[0] = _select(qbuf, eps, rng0)
            _q_all(W[1], idx[1], qbuf)
            acts[1] = _select(qbuf, eps, rng1)
            _q_all(W[2], idx[2], qbuf)
            acts[2] = _select(qbuf, eps, rng2)
            for j in range(2):
                p_state[j, 0] = pos[j, 0]
                p_state[j, 1] = pos[j, 1]
                p_state[j, 2] = vel[j, 0]
                p_state[j, 3] = vel[j, 1]
            # (d) physics and rewards
            for i in range(N_AGENTS):
                forces[i, 0] = FORCE_BASIS[acts[i], 0] * max_force
                forces[i, 1] = FORCE_BASIS[acts[i], 1] * max_force
            integrate(pos, vel, forces, obstacles, phys)
            ok = team_rewards(pos, landmarks[g], capture, bonus, rew)
            done = False
            if ok:
                success = 1
                done = True
            if t + 1 >= max_steps:
                done = True
            ret_raw += rew[0] + rew[1] + rew[2]
            # (e)-(f) previous actions
            if t > 0:
                shaped[0] = p_rew[0] + beta * (p_div0 - div0) if shaping else p_rew[0]
                shaped[1] = p_rew[1] + beta * (p_div1 - div1) if shaping else p_rew[1]
                shaped[2] = p_rew[2]
                ret_shaped += shaped[0] + shaped[1] + shaped[2]
                for i in range(N_AGENTS):
                    _tile_td(W[i], p_idx[i], p_acts[i], shaped[i], idx[i], False, alpha,
                             gamma, qbuf)
            for i in range(N_AGENTS):
                p_acts[i] = acts[i]
                p_rew[i] = rew[i]
                for j in range(n_til):
                    p_idx[i, j] = idx[i, j]
            p_div0 = div0
            p_div1 = div1
            t += 1
            if done:
                break
        T = t
        # closing pass for the final actions
        _maxent_update(b1, p_state[0, 0], p_state[0, 1], p_state[0, 2], p_state[0, 3],
                       p_acts[0], landmarks, phys, beta_like, q)
        _maxent_update(b2, p_state[1, 0], p_state[1, 1], p_state[1, 2], p_state[1, 3],
                       p_acts[1], landmarks, phys, beta_like, q)
        hist[T, :] = b1
        div0 = _divergence(b1, g, es) if shaping else 0.0
        div1 = _divergence(b2, g, es) if shaping else 0.0
        shaped[0] = p_rew[0] + beta * (p_div0 - div0) if shaping else p_rew[0]
        shaped[1] = p_rew[1] + beta * (p_div1 - div1) if shaping else p_rew[1]
        shaped[2] = p_rew[2]
        ret_shaped += shaped[0] + shaped[1] + shaped[2]
        for i in range(N_AGENTS):
            _tile_td(W[i], p_idx[i], p_acts[i], shaped[i], p_idx[i], True, alpha, gamma,
                     qbuf)
        t_star = T + 1
        for i in range(T, -1, -1):
            if _correct(hist[i], g):
                t_star = i
            else:
                break
        row = ep - ep_start
        out[row, 0] = ret_raw
        out[row, 1] = ret_shaped
        out[row, 2] = success
        out[row, 3] = 1.0 if t_star > T else t_star / T
        out[row, 4] = 1.0 if t_star <= T else 0.0
        out[row, 5] = T
        out[row, 6] = g
