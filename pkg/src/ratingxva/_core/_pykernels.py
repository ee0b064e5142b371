"""Vectorized numpy implementation of the path kernels.

Consumes the per-path random streams in exactly the same order as the
compiled kernels, so both backends produce the same paths.
"""

from __future__ import annotations

import numpy as np

from .rng import GAMMA, draws, mix64, to_unit

NONE = -1


def simulate_chains(cum, exit_rate, initial, horizon, seeds):
    """Jump-chain sampling for many paths.

    Returns CSR arrays ``(offsets, times, states)``: the jumps of path ``p``
    are ``times[offsets[p]:offsets[p + 1]]``.
    """
    cum = np.ascontiguousarray(cum, dtype=np.float64)
    exit_rate = np.ascontiguousarray(exit_rate, dtype=np.float64)
    n = len(seeds)
    st = np.array(seeds, dtype=np.uint64, copy=True)
    s = np.array(np.broadcast_to(np.asarray(initial, dtype=np.int64), (n,)), copy=True)
    t = np.zeros(n)
    active = np.flatnonzero(exit_rate[s] > 0)
    ev_p, ev_t, ev_s = [], [], []
    while active.size:
        st[active] += GAMMA
        u = to_unit(mix64(st[active]))
        t[active] += -np.log(u) / exit_rate[s[active]]
        active = active[t[active] <= horizon]
        if not active.size:
            break
        st[active] += GAMMA
        u2 = to_unit(mix64(st[active]))
        v = np.argmax(u2[:, None] < cum[s[active]], axis=1).astype(np.int64)
        s[active] = v
        ev_p.append(active)
        ev_t.append(t[active])
        ev_s.append(v)
        active = active[exit_rate[v] > 0]
    if ev_p:
        p = np.concatenate(ev_p)
        order = np.argsort(p, kind="stable")
        times = np.concatenate(ev_t)[order]
        states = np.concatenate(ev_s)[order]
        counts = np.bincount(p, minlength=n)
    else:
        times = np.empty(0)
        states = np.empty(0, dtype=np.int64)
        counts = np.zeros(n, dtype=np.int64)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets, times, states


def ou_paths(seeds, decay, shift, sd, r0):
    """Exact Gaussian recursion ``r[k+1] = r[k] * decay[k] + shift[k] + sd[k] * z``."""
    n, steps = len(seeds), len(decay)
    pairs = (steps + 1) // 2
    raw = draws(seeds, 2 * pairs)
    u1 = to_unit(raw[:, 0::2])
    u2 = to_unit(raw[:, 1::2])
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * u2
    z = np.empty((n, 2 * pairs))
    z[:, 0::2] = rad * np.cos(ang)
    z[:, 1::2] = rad * np.sin(ang)
    r = np.empty((n, steps + 1))
    r[:, 0] = r0
    for k in range(steps):
        r[:, k + 1] = r[:, k] * decay[k] + shift[k] + sd[k] * z[:, k]
    return r


def _segment_first(cand, offsets, counts):
    padded = np.append(cand, np.iinfo(np.int64).max)
    first = np.minimum.reduceat(padded, offsets[:-1]) if len(counts) else np.empty(0, np.int64)
    first[counts == 0] = np.iinfo(np.int64).max
    first[first == np.iinfo(np.int64).max] = NONE
    return first


def first_passage(offsets, states, K, n_components, component):
    """First event index at which ``component`` is ``>= L`` (``ge``) and is in
    ``L..K-1`` (``band``), for every level ``L`` in ``0..K`` (columns 0 unused).
    ``-1`` means never."""
    offsets = np.asarray(offsets, dtype=np.int64)
    n = len(offsets) - 1
    counts = np.diff(offsets)
    vals = (np.asarray(states, dtype=np.int64) // K ** (n_components - 1 - component)) % K + 1
    idx = np.arange(len(vals), dtype=np.int64)
    big = np.iinfo(np.int64).max
    ge = np.full((n, K + 1), NONE, dtype=np.int64)
    band = np.full((n, K + 1), NONE, dtype=np.int64)
    for L in range(1, K + 1):
        ge[:, L] = _segment_first(np.where(vals >= L, idx, big), offsets, counts)
        band[:, L] = _segment_first(np.where((vals >= L) & (vals < K), idx, big), offsets, counts)
    return ge, band


def states_at(offsets, times, states, initial, query):
    """Product state of each path at each query time (jumps at ``t <= q`` count)."""
    offsets = np.asarray(offsets, dtype=np.int64)
    n = len(offsets) - 1
    counts = np.diff(offsets)
    out = np.empty((n, len(query)), dtype=np.int64)
    initial = np.broadcast_to(np.asarray(initial, dtype=np.int64), (n,))
    for q, tq in enumerate(query):
        flag = np.append((times <= tq).astype(np.int64), 0)
        c = np.add.reduceat(flag, offsets[:-1]) if n else np.empty(0, np.int64)
        c[counts == 0] = 0
        last = offsets[:-1] + c - 1
        out[:, q] = np.where(c > 0, np.asarray(states)[np.maximum(last, 0)] if len(states) else 0, initial)
    return out
