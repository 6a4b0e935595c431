"""Hot loops used by the evaluators, with a numba path and a numpy path.

The backend is picked once at import time from ``SEQREVEAL_BACKEND``
(``numba`` or ``numpy``). Without the variable numba is used when it can be
imported. Both implementations are importable as ``NUMBA`` and ``NUMPY`` so
parity tests and the benchmark can call them side by side.

All discounting follows the averaged convention
``V_t = (1 - delta) * f_t + delta * V_{t+1}``.
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np
from scipy.signal import lfilter

# a rent period that covers the target up to this relative slack counts as covering it
SPLIT_RTOL = 1e-13

# ---------------------------------------------------------------------------
# numpy fallback


def _np_discounted_backward(flows, terminal, delta):
    flows = np.asarray(flows, dtype=float)
    n = flows.size
    out = np.empty(n + 1)
    out[n] = terminal
    if n:
        y, _ = lfilter([1.0 - delta], [1.0, -delta], flows[::-1], zi=[delta * terminal])
        out[:n] = y[::-1]
    return out


def _np_stopping_backward(immediate, flows, terminal, delta):
    n = len(flows)
    W = np.empty(n + 1)
    D = np.empty(n)
    W[n] = terminal
    w = terminal
    for t in range(n - 1, -1, -1):
        d = (1.0 - delta) * flows[t] + delta * w
        D[t] = d
        w = immediate[t] if immediate[t] > d else d
        W[t] = w
    return W, D


def _np_segment_values(offsets, flows, tails, delta):
    k = len(offsets) - 1
    start = np.empty(k)
    low = np.empty(k)
    for i in range(k):
        vals = _np_discounted_backward(flows[offsets[i]:offsets[i + 1]], tails[i], delta)
        start[i] = vals[0]
        low[i] = vals.min()
    return start, low


def _np_segment_sup(offsets, flows, tails, delta):
    k = len(offsets) - 1
    out = np.empty(k)
    for i in range(k):
        s = max(0.0, tails[i])
        for j in range(offsets[i + 1] - 1, offsets[i] - 1, -1):
            s = max(0.0, (1.0 - delta) * flows[j] + delta * s)
        out[i] = s
    return out


def _np_scatter_cohorts(cohort_ids, masses, offsets, rewards, tails, L):
    cohort_ids = np.asarray(cohort_ids)
    masses = np.asarray(masses, dtype=float)
    active = np.flatnonzero((cohort_ids >= 0) & (masses > 0))
    if active.size == 0:
        return np.zeros(L)
    ids = cohort_ids[active]
    w = masses[active]
    lengths = offsets[ids + 1] - offsets[ids]
    total = int(lengths.sum())
    # position within each cohort's reward phase
    seg_start = np.repeat(np.cumsum(lengths) - lengths, lengths)
    k = np.arange(total) - seg_start
    src = np.repeat(offsets[ids], lengths) + k
    pos = np.repeat(active, lengths) + k
    keep = pos < L
    out = np.bincount(pos[keep], weights=np.repeat(w, lengths)[keep] * rewards[src[keep]], minlength=L)
    tail_pos = active + lengths
    keep = tail_pos < L
    diff = np.bincount(tail_pos[keep], weights=w[keep] * tails[ids[keep]], minlength=L)
    return out + np.cumsum(diff)


def _np_split_rent_constant(targets, dcs, delta):
    targets = np.asarray(targets, dtype=float)
    dcs = np.asarray(dcs, dtype=float)
    m = np.full(targets.shape, -1, dtype=np.int64)
    beta = np.full(targets.shape, np.nan)
    ok = (targets > 0) & (dcs > 0) & (targets < dcs)
    if not ok.any():
        return m, beta
    t, d = targets[ok], dcs[ok]
    k = np.floor(np.log1p(-t / d) / math.log(delta)).astype(np.int64)
    k = np.maximum(k, 0)
    # the log estimate can be off by one either way
    tt = t * (1.0 - SPLIT_RTOL)
    for _ in range(2):
        up = (1.0 - delta ** (k + 1)) * d < tt
        k = np.where(up, k + 1, k)
        down = (k > 0) & ((1.0 - delta**k) * d >= tt)
        k = np.where(down, k - 1, k)
    dk = delta**k
    m[ok] = k + 1
    beta[ok] = np.minimum(1.0, (t - (1.0 - dk) * d) / ((1.0 - delta) * dk * d))
    return m, beta


NUMPY = SimpleNamespace(
    name="numpy",
    discounted_backward=_np_discounted_backward,
    stopping_backward=_np_stopping_backward,
    segment_values=_np_segment_values,
    segment_sup=_np_segment_sup,
    scatter_cohorts=_np_scatter_cohorts,
    split_rent_constant=_np_split_rent_constant,
)

# ---------------------------------------------------------------------------
# numba path


def _build_numba():
    from numba import njit

    @njit(cache=True)
    def discounted_backward(flows, terminal, delta):
        n = flows.shape[0]
        out = np.empty(n + 1)
        out[n] = terminal
        v = terminal
        for t in range(n - 1, -1, -1):
            v = (1.0 - delta) * flows[t] + delta * v
            out[t] = v
        return out

    @njit(cache=True)
    def stopping_backward(immediate, flows, terminal, delta):
        n = flows.shape[0]
        W = np.empty(n + 1)
        D = np.empty(n)
        W[n] = terminal
        w = terminal
        for t in range(n - 1, -1, -1):
            d = (1.0 - delta) * flows[t] + delta * w
            D[t] = d
            w = immediate[t] if immediate[t] > d else d
            W[t] = w
        return W, D

    @njit(cache=True)
    def segment_values(offsets, flows, tails, delta):
        k = offsets.shape[0] - 1
        start = np.empty(k)
        low = np.empty(k)
        for i in range(k):
            v = tails[i]
            lo = v
            for j in range(offsets[i + 1] - 1, offsets[i] - 1, -1):
                v = (1.0 - delta) * flows[j] + delta * v
                if v < lo:
                    lo = v
            start[i] = v
            low[i] = lo
        return start, low

    @njit(cache=True)
    def segment_sup(offsets, flows, tails, delta):
        k = offsets.shape[0] - 1
        out = np.empty(k)
        for i in range(k):
            s = max(0.0, tails[i])
            for j in range(offsets[i + 1] - 1, offsets[i] - 1, -1):
                s = max(0.0, (1.0 - delta) * flows[j] + delta * s)
            out[i] = s
        return out

    @njit(cache=True)
    def scatter_cohorts(cohort_ids, masses, offsets, rewards, tails, L):
        out = np.zeros(L)
        diff = np.zeros(L + 1)
        for T in range(cohort_ids.shape[0]):
            c = cohort_ids[T]
            w = masses[T]
            if c < 0 or w <= 0.0:
                continue
            a = offsets[c]
            m = offsets[c + 1] - a
            for k in range(m):
                if T + k >= L:
                    break
                out[T + k] += w * rewards[a + k]
            if T + m < L:
                diff[T + m] += w * tails[c]
        acc = 0.0
        for t in range(L):
            acc += diff[t]
            out[t] += acc
        return out

    @njit(cache=True)
    def split_rent_constant(targets, dcs, delta):
        n = targets.shape[0]
        m = np.full(n, -1, dtype=np.int64)
        beta = np.full(n, np.nan)
        logd = math.log(delta)
        for i in range(n):
            t = targets[i]
            d = dcs[i]
            if not (t > 0.0 and d > 0.0 and t < d):
                continue
            k = int(math.floor(math.log1p(-t / d) / logd))
            if k < 0:
                k = 0
            tt = t * (1.0 - SPLIT_RTOL)
            while (1.0 - delta ** (k + 1)) * d < tt:
                k += 1
            while k > 0 and (1.0 - delta**k) * d >= tt:
                k -= 1
            dk = delta**k
            m[i] = k + 1
            beta[i] = min(1.0, (t - (1.0 - dk) * d) / ((1.0 - delta) * dk * d))
        return m, beta

    return SimpleNamespace(
        name="numba",
        discounted_backward=discounted_backward,
        stopping_backward=stopping_backward,
        segment_values=segment_values,
        segment_sup=segment_sup,
        scatter_cohorts=scatter_cohorts,
        split_rent_constant=split_rent_constant,
    )


try:
    NUMBA = _build_numba()
except ImportError:  # numba is optional
    NUMBA = None


def _select():
    want = os.environ.get("SEQREVEAL_BACKEND", "").strip().lower()
    if want in ("", "auto"):
        return NUMBA or NUMPY
    if want == "numpy":
        return NUMPY
    if want == "numba":
        if NUMBA is None:
            raise ImportError("SEQREVEAL_BACKEND=numba but numba is not installed")
        return NUMBA
    raise ValueError(f"SEQREVEAL_BACKEND must be 'numba' or 'numpy', got {want!r}")


BACKEND = _select()


def _f(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def _i(x):
    return np.ascontiguousarray(x, dtype=np.int64)


# thin wrappers that normalise dtypes so both backends see the same inputs

def discounted_backward(flows, terminal, delta):
    return BACKEND.discounted_backward(_f(flows), float(terminal), float(delta))


def stopping_backward(immediate, flows, terminal, delta):
    return BACKEND.stopping_backward(_f(immediate), _f(flows), float(terminal), float(delta))


def segment_values(offsets, flows, tails, delta):
    return BACKEND.segment_values(_i(offsets), _f(flows), _f(tails), float(delta))


def segment_sup(offsets, flows, tails, delta):
    return BACKEND.segment_sup(_i(offsets), _f(flows), _f(tails), float(delta))


def scatter_cohorts(cohort_ids, masses, offsets, rewards, tails, L):
    return BACKEND.scatter_cohorts(_i(cohort_ids), _f(masses), _i(offsets), _f(rewards), _f(tails), int(L))


def split_rent_constant(targets, dcs, delta):
    return BACKEND.split_rent_constant(_f(targets), _f(dcs), float(delta))


def warmup():
    """Trigger compilation of every kernel on tiny inputs."""
    off = np.array([0, 2], dtype=np.int64)
    f = np.array([0.1, 0.2])
    discounted_backward(f, 0.0, 0.9)
    stopping_backward(f, f, 0.0, 0.9)
    segment_values(off, f, np.array([0.0]), 0.9)
    segment_sup(off, f, np.array([0.0]), 0.9)
    scatter_cohorts(np.array([0, -1]), np.array([0.1, 0.0]), off, f, np.array([0.0]), 4)
    split_rent_constant(np.array([0.05]), np.array([0.5]), 0.9)
