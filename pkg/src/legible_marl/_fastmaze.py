"""Compiled maze training loop.

Same algorithm and the same random draws as the step-pipeline loop in
``maze_training``; only the data layout differs (dense arrays instead of
dicts).  Tests hold the two to bitwise agreement on short runs.
"""
import math

import numba as nb
import numpy as np

N_GOALS = 4
N_ACTIONS = 5
STAY = 4
N_BINS = 3
OUT_COLS = 7  # return_raw, return_shaped, success, ptr, pred_correct, steps, goal


@nb.njit(cache=True)
def _argmax_low(v):
    b = 0
    for i in range(1, v.shape[0]):
        if v[i] > v[b]:
            b = i
    return b


@nb.njit(cache=True)
def _select(q, eps, rng):
    if rng.random() < eps:
        return int(rng.random() * q.shape[0])
    return _argmax_low(q)


@nb.njit(cache=True)
def _divergence(b, g, es):
    if es == 0.0:
        return -math.log(max(b[g], 1e-12))
    n = b.shape[0]
    d = 0.0
    for j in range(n):
        gt = 1.0 - es * (n - 1) if j == g else es
        if b[j] > 0:
            d += b[j] * math.log(b[j] / gt)
    return d if d > 0.0 else 0.0


@nb.njit(cache=True)
def _recognize(b, cnt, s, a, alpha):
    n_act = cnt.shape[2]
    post = np.empty(b.shape[0])
    z = 0.0
    for k in range(b.shape[0]):
        tot = 0.0
        for j in range(n_act):
            tot += cnt[s, k, j]
        lik = (cnt[s, k, a] + alpha) / (tot + alpha * n_act)
        post[k] = lik * b[k]
        z += post[k]
    if z < 1e-300:
        return
    for k in range(b.shape[0]):
        b[k] = max(post[k] / z, 1e-12)


@nb.njit(cache=True)
def _conf_bin(c):
    if c < 0.5:
        return 0
    if c < 0.8:
        return 1
    return 2


@nb.njit(cache=True)
def _follower_key(s, b, known):
    # known >= 0 only when the target is public
    gh = _argmax_low(b) if known < 0 else known
    return (s * N_GOALS + gh) * N_BINS + _conf_bin(b[gh])


@nb.njit(cache=True)
def _td(Q, k, a, r, k2, a2, done, alpha, gamma, sarsa):
    if done:
        target = r
    elif sarsa:
        target = r + gamma * Q[k2, a2]
    else:
        m = Q[k2, 0]
        for j in range(1, Q.shape[1]):
            if Q[k2, j] > m:
                m = Q[k2, j]
        target = r + gamma * m
    new = Q[k, a] + alpha * (target - Q[k, a])
    if not math.isfinite(new):
        raise FloatingPointError("TD update diverged")
    Q[k, a] = new


@nb.njit(cache=True)
def _correct(b, g):
    m = _argmax_low(b)
    if m != g:
        return False
    for k in range(b.shape[0]):
        if k != m and b[k] == b[m]:
            return False
    return True


@nb.njit(cache=True)
def train_chunk(QL, QF, cnt, rng_goal, rng_l, rng_f, nxt, exits, l0, f0, n_cells,
                ep_start, ep_stop, n_episodes, max_steps, beta, es, shaping, sarsa, alpha,
                gamma, eps_start, eps_end, eps_fraction, laplace, public, out, traj):
    """Train episodes ``ep_start .. ep_stop-1`` in place.

    ``traj`` has shape (n, max_steps, 2); when n > 0 the joint actions of
    episode ``ep_start + i`` are written to ``traj[i]`` (padded with -1).
    """
    G = N_GOALS
    hist = np.zeros((max_steps + 1, G))
    b = np.empty(G)
    ks = np.zeros(max_steps, np.int64)
    ka = np.zeros(max_steps, np.int64)
    for ep in range(ep_start, ep_stop):
        frac = ep / (eps_fraction * n_episodes)
        eps = eps_start - (eps_start - eps_end) * frac
        if not eps > eps_end:
            eps = eps_end
        g = int(rng_goal.random() * G)
        l = l0
        f = f0
        for k in range(G):
            b[k] = 1.0 / G
        hist[0, :] = b
        ret_raw = 0.0
        ret_shaped = 0.0
        success = 0
        T = 0
        p_kl = 0
        p_kf = 0
        p_al = 0
        p_af = 0
        p_rl = 0.0
        p_rf = 0.0
        p_s = 0
        p_div = 0.0
        t = 0
        while True:
            s = l * n_cells + f
            # (a) the follower folds in the leader's previous action
            if t > 0:
                _recognize(b, cnt, p_s, p_al, laplace)
                hist[t, :] = b
            # (b) leader self-belief equals the follower's belief
            div = _divergence(b, g, es) if shaping else 0.0
            # (c) actions
            kl = (s * G + g) * N_BINS
            kf = _follower_key(s, b, g if public else -1)
            al = _select(QL[kl], eps, rng_l)
            af = _select(QF[kf], eps, rng_f)
            if ep - ep_start < traj.shape[0]:
                traj[ep - ep_start, t, 0] = al
                traj[ep - ep_start, t, 1] = af
            # (d) environment
            nl = nxt[l, al]
            nf = nxt[f, af]
            rl = -0.1 if al != STAY else 0.0
            rf = -0.1 if af != STAY else 0.0
            done = False
            if nl == exits[g] and nf == exits[g]:
                rl += 1.0
                rf += 1.0
                done = True
                success = 1
            if t + 1 >= max_steps:
                done = True
            ret_raw += rl + rf
            ks[t] = s
            ka[t] = al
            # (e)-(f) score and learn from the previous actions
            if t > 0:
                klg = p_div - div if shaping else 0.0
                r_sh = p_rl + beta * klg if shaping else p_rl
                ret_shaped += r_sh + p_rf
                _td(QL, p_kl, p_al, r_sh, kl, al, False, alpha, gamma, sarsa)
                _td(QF, p_kf, p_af, p_rf, kf, af, False, alpha, gamma, sarsa)
            p_kl = kl
            p_kf = kf
            p_al = al
            p_af = af
            p_rl = rl
            p_rf = rf
            p_s = s
            p_div = div
            l = nl
            f = nf
            t += 1
            if done:
                break
        T = t
        # closing step: score the final actions
        s = l * n_cells + f
        _recognize(b, cnt, p_s, p_al, laplace)
        hist[T, :] = b
        div = _divergence(b, g, es) if shaping else 0.0
        kl = (s * G + g) * N_BINS
        kf = _follower_key(s, b, g if public else -1)
        klg = p_div - div if shaping else 0.0
        r_sh = p_rl + beta * klg if shaping else p_rl
        ret_shaped += r_sh + p_rf
        _td(QL, p_kl, p_al, r_sh, kl, 0, True, alpha, gamma, sarsa)
        _td(QF, p_kf, p_af, p_rf, kf, 0, True, alpha, gamma, sarsa)
        # the follower learns from the revealed goal
        for i in range(T):
            cnt[ks[i], g, ka[i]] += 1.0
        # metrics
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
