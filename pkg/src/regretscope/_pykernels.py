"""Pure-Python Q-learning and rollout loops.

Bitwise twin of ``_ckernels.pyx``: the same random arrays drive the same
operations in the same order, so both produce identical tables and returns.
"""
from __future__ import annotations

import numpy as np


def _argmax(row):
    best = 0
    m = row[0]
    for a in range(1, len(row)):
        if row[a] > m:
            m = row[a]
            best = a
    return best


def q_learn(q, next_state, reward, tokens, start, ep_config, eps, r_eps, r_act, r_force,
            patterns, p_force, alpha, gamma, horizon):
    """One-step Q-learning over pre-drawn episodes; updates ``q`` in place."""
    qs = q.tolist()
    nxt = next_state.tolist()
    rew = reward.tolist()
    tok = tokens.tolist()
    starts = start.tolist()
    for e in range(ep_config.shape[0]):
        re = r_eps[e].tolist()
        ra = r_act[e].tolist()
        rf = r_force[e].tolist()
        pat = patterns[e].tolist()
        eps_e = float(eps[e])
        s = starts[int(ep_config[e])]
        z = tok[s][pat[0]]
        for t in range(horizon):
            if rf[t] < p_force or re[t] < eps_e or z < 0:
                a = ra[t]
            else:
                a = _argmax(qs[z])
            s2 = nxt[s][a]
            r = rew[s][a]
            z2 = -1
            if s2 < 0:
                target = r
            else:
                z2 = tok[s2][pat[t + 1]]
                if z2 >= 0:
                    target = r + gamma * max(qs[z2])
                else:
                    target = r
            if z >= 0:
                row = qs[z]
                row[a] = row[a] + alpha * (target - row[a])
            if s2 < 0:
                break
            s = s2
            z = z2
    q[...] = np.asarray(qs, dtype=np.float64).reshape(q.shape)


def rollout_returns(q, next_state, reward, tokens, start, ep_config, r_act, r_force,
                    patterns, p_force, gamma, horizon, out):
    """Greedy (or forced-random) episodes; writes discounted returns into ``out``."""
    qs = q.tolist()
    nxt = next_state.tolist()
    rew = reward.tolist()
    tok = tokens.tolist()
    starts = start.tolist()
    for e in range(ep_config.shape[0]):
        ra = r_act[e].tolist()
        rf = r_force[e].tolist()
        pat = patterns[e].tolist()
        s = starts[int(ep_config[e])]
        g = 0.0
        disc = 1.0
        for t in range(horizon):
            z = tok[s][pat[t]]
            if rf[t] < p_force or z < 0:
                a = ra[t]
            else:
                a = _argmax(qs[z])
            s2 = nxt[s][a]
            g = g + disc * rew[s][a]
            disc = disc * gamma
            if s2 < 0:
                break
            s = s2
        out[e] = g
