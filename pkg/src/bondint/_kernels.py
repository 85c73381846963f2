"""Hot numeric kernels with a numba lane and a pure-numpy fallback.

The lane is picked once at import time: set ``BONDINT_NUMBA=0`` to force
the numpy implementations even when numba is installed.  Kernels never
reduce across scenarios internally, so results do not depend on the
thread count.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit, prange

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

_FLAG = os.environ.get("BONDINT_NUMBA", "1").strip().lower()
USE_NUMBA = HAS_NUMBA and _FLAG not in ("0", "false", "no")


def running_sign_weights_numpy(d_values: np.ndarray) -> np.ndarray:
    """Greedy control h_k = sign of the running integral sum_{j<k} h_j * dY_j.

    h_0 = +1 and sign(0) counts as +1, so |h| = 1 everywhere.
    """
    n_scen, n_steps = d_values.shape
    out = np.empty((n_scen, n_steps))
    running = np.zeros(n_scen)
    for k in range(n_steps):
        h = np.where(running >= 0.0, 1.0, -1.0)
        out[:, k] = h
        running = running + h * d_values[:, k]
    return out


def capped_sup_stat_numpy(contrib: np.ndarray) -> np.ndarray:
    """Per scenario: min(1, max_n |cumsum(contrib)|)."""
    sup = np.max(np.abs(np.cumsum(contrib, axis=1)), axis=1)
    return np.minimum(1.0, sup)


def jump_node_values_numpy(times: np.ndarray, jump_times: np.ndarray, inv_sq: np.ndarray) -> np.ndarray:
    """Closed-form paths (t ^ T_i) * i^-2 - 1{t >= T_i}, shape (S, N, I)."""
    t = times[None, :, None]
    tj = jump_times[:, None, :]
    return np.minimum(t, tj) * inv_sq[None, None, :] - (t >= tj)


if USE_NUMBA:

    @njit(cache=True, parallel=True)
    def running_sign_weights(d_values):  # pragma: no cover - jitted
        n_scen, n_steps = d_values.shape
        out = np.empty((n_scen, n_steps))
        for s in prange(n_scen):
            running = 0.0
            for k in range(n_steps):
                h = 1.0 if running >= 0.0 else -1.0
                out[s, k] = h
                running += h * d_values[s, k]
        return out

    @njit(cache=True, parallel=True)
    def capped_sup_stat(contrib):  # pragma: no cover - jitted
        n_scen, n_steps = contrib.shape
        out = np.empty(n_scen)
        for s in prange(n_scen):
            acc = 0.0
            sup = 0.0
            for k in range(n_steps):
                acc += contrib[s, k]
                a = abs(acc)
                if a > sup:
                    sup = a
            out[s] = sup if sup < 1.0 else 1.0
        return out

    # no fastmath: an fma contraction of t * w - 1 would break bit
    # agreement with the numpy lane
    @njit(cache=True, parallel=True)
    def jump_node_values(times, jump_times, inv_sq):  # pragma: no cover - jitted
        n_scen = jump_times.shape[0]
        n_t = times.shape[0]
        n_i = inv_sq.shape[0]
        out = np.empty((n_scen, n_t, n_i))
        for s in prange(n_scen):
            for i in range(n_i):
                tj = jump_times[s, i]
                for n in range(n_t):
                    t = times[n]
                    tmin = t if t < tj else tj
                    val = tmin * inv_sq[i]
                    if t >= tj:
                        val -= 1.0
                    out[s, n, i] = val
        return out

else:
    running_sign_weights = running_sign_weights_numpy
    capped_sup_stat = capped_sup_stat_numpy
    jump_node_values = jump_node_values_numpy
