"""Hot loops: walk simulation, regeneration detection, block harvesting.

All functions here are written in the numba-compatible subset so they can be
compiled or run as plain Python (see :mod:`rwre._accel`).  Sites are
hashed on the fly, a step's uniform is the ``n``-th output of the walk's
counter stream.
"""

from __future__ import annotations

import numpy as np

from . import _rng
from ._accel import jit
from .env import sample_jump, site_atom

STATUS_OK = 0
STATUS_CAP = 1


@jit(nogil=True)
def quenched_path(family, atom_cdf, jump_z, jump_cdf, n_jumps, env_key, walk_key, x0, n_steps):
    d = x0.shape[0]
    out = np.empty((n_steps + 1, d), dtype=np.int64)
    x = x0.copy()
    z = np.zeros(d, dtype=np.int64)
    out[0] = x
    for n in range(n_steps):
        a = site_atom(family, atom_cdf, env_key, x)
        u = _rng.stream_uniform(walk_key, n)
        sample_jump(family, jump_z, jump_cdf, n_jumps, a, u, z)
        for c in range(d):
            x[c] += z[c]
        out[n + 1] = x
    return out


@jit(nogil=True)
def regeneration_indices(proj, threshold):
    """sigma_0 = 0 and each next index where the projection gains ``threshold``."""
    n = proj.shape[0]
    out = np.empty(n, dtype=np.int64)
    out[0] = 0
    k = 1
    base = proj[0]
    for i in range(1, n):
        if proj[i] - base >= threshold:
            out[k] = i
            k += 1
            base = proj[i]
    return out[:k]


@jit(nogil=True)
def harvest_blocks(family, atom_cdf, jump_z, jump_cdf, n_jumps, u_hat, env_key, walk_key,
                   n_blocks, threshold, step_cap, durations, displacements):
    """Run one annealed walk from the origin and record ``n_blocks`` blocks.

    Returns ``(n_done, status, total_steps)``; stops early with STATUS_CAP
    when a single block exceeds ``step_cap`` steps.
    """
    d = u_hat.shape[0]
    x = np.zeros(d, dtype=np.int64)
    start = np.zeros(d, dtype=np.int64)
    z = np.zeros(d, dtype=np.int64)
    n = 0
    base_proj = 0.0
    for b in range(n_blocks):
        for c in range(d):
            start[c] = x[c]
        steps = 0
        while True:
            a = site_atom(family, atom_cdf, env_key, x)
            u = _rng.stream_uniform(walk_key, n)
            sample_jump(family, jump_z, jump_cdf, n_jumps, a, u, z)
            n += 1
            steps += 1
            proj = 0.0
            for c in range(d):
                x[c] += z[c]
                proj += x[c] * u_hat[c]
            if proj - base_proj >= threshold:
                base_proj = proj
                break
            if steps >= step_cap:
                return b, STATUS_CAP, n
        durations[b] = steps
        for c in range(d):
            displacements[b, c] = x[c] - start[c]
    return n_blocks, STATUS_OK, n


@jit(nogil=True)
def first_regeneration(family, atom_cdf, jump_z, jump_cdf, n_jumps, u_hat, env_keys, walk_keys, cap, threshold):
    """sigma_1 capped at ``cap`` for independent (environment, walk) pairs."""
    m = env_keys.shape[0]
    d = u_hat.shape[0]
    out = np.empty(m, dtype=np.int64)
    x = np.zeros(d, dtype=np.int64)
    z = np.zeros(d, dtype=np.int64)
    for r in range(m):
        for c in range(d):
            x[c] = 0
        n = 0
        while n < cap:
            a = site_atom(family, atom_cdf, env_keys[r], x)
            u = _rng.stream_uniform(walk_keys[r], n)
            sample_jump(family, jump_z, jump_cdf, n_jumps, a, u, z)
            n += 1
            proj = 0.0
            for c in range(d):
                x[c] += z[c]
                proj += x[c] * u_hat[c]
            if proj >= threshold:
                break
        out[r] = n
    return out


@jit(nogil=True)
def endpoint_events(family, atom_cdf, jump_z, jump_cdf, n_jumps, env_keys, walk_keys, n_steps, ev_sites, ev_atoms):
    """Indicator that the event holds in the environment seen from ``X_n``."""
    m = env_keys.shape[0]
    d = jump_z.shape[2]
    out = np.zeros(m, dtype=np.bool_)
    x = np.zeros(d, dtype=np.int64)
    y = np.zeros(d, dtype=np.int64)
    z = np.zeros(d, dtype=np.int64)
    for r in range(m):
        for c in range(d):
            x[c] = 0
        for n in range(n_steps):
            a = site_atom(family, atom_cdf, env_keys[r], x)
            u = _rng.stream_uniform(walk_keys[r], n)
            sample_jump(family, jump_z, jump_cdf, n_jumps, a, u, z)
            for c in range(d):
                x[c] += z[c]
        ok = True
        for j in range(ev_sites.shape[0]):
            for c in range(d):
                y[c] = x[c] + ev_sites[j, c]
            if site_atom(family, atom_cdf, env_keys[r], y) != ev_atoms[j]:
                ok = False
                break
        out[r] = ok
    return out


@jit(nogil=True)
def regeneration_window_counts(family, atom_cdf, jump_z, jump_cdf, n_jumps, u_hat, env_keys, walk_keys,
                               k, ev_sites, ev_atoms, step_cap):
    """Per replicate: block length ``sigma_{k+1}-sigma_k`` and event count inside it."""
    m = env_keys.shape[0]
    d = u_hat.shape[0]
    lengths = np.zeros(m, dtype=np.int64)
    counts = np.zeros(m, dtype=np.int64)
    x = np.zeros(d, dtype=np.int64)
    y = np.zeros(d, dtype=np.int64)
    z = np.zeros(d, dtype=np.int64)
    for r in range(m):
        for c in range(d):
            x[c] = 0
        n = 0
        block = 0
        base = 0.0
        steps = 0
        while block <= k and steps < step_cap:
            if block == k:
                ok = True
                for j in range(ev_sites.shape[0]):
                    for c in range(d):
                        y[c] = x[c] + ev_sites[j, c]
                    if site_atom(family, atom_cdf, env_keys[r], y) != ev_atoms[j]:
                        ok = False
                        break
                if ok:
                    counts[r] += 1
                lengths[r] += 1
            a = site_atom(family, atom_cdf, env_keys[r], x)
            u = _rng.stream_uniform(walk_keys[r], n)
            sample_jump(family, jump_z, jump_cdf, n_jumps, a, u, z)
            n += 1
            steps += 1
            proj = 0.0
            for c in range(d):
                x[c] += z[c]
                proj += x[c] * u_hat[c]
            if proj - base >= 1.0:
                base = proj
                block += 1
                steps = 0
    return lengths, counts


@jit(nogil=True)
def visited_1d(family, atom_cdf, jump_z, jump_cdf, n_jumps, env_key, walk_key, horizon):
    """Boolean mask of sites in ``[0, horizon]`` visited by a 1d walk from 0."""
    seen = np.zeros(horizon + 1, dtype=np.bool_)
    x = np.zeros(1, dtype=np.int64)
    z = np.zeros(1, dtype=np.int64)
    n = 0
    while x[0] <= horizon:
        seen[x[0]] = True
        a = site_atom(family, atom_cdf, env_key, x)
        u = _rng.stream_uniform(walk_key, n)
        sample_jump(family, jump_z, jump_cdf, n_jumps, a, u, z)
        x[0] += z[0]
        n += 1
    return seen


@jit(nogil=True)
def quenched_endpoints_1d(probs, x_max, n_steps, walk_keys):
    """X_n for many walks in one 1d environment given as a site table.

    ``probs[x, r]`` is the probability of jump ``r`` at site ``x``; the walk
    must not leave ``[0, x_max)``.
    """
    m = walk_keys.shape[0]
    R = probs.shape[1]
    out = np.empty(m, dtype=np.int64)
    for w in range(m):
        x = 0
        for n in range(n_steps):
            u = _rng.stream_uniform(walk_keys[w], n)
            acc = 0.0
            r = R - 1
            for j in range(R - 1):
                acc += probs[x, j]
                if u < acc:
                    r = j
                    break
            x += r
        out[w] = x
    return out
