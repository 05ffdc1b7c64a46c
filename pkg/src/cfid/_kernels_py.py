"""Vectorised numpy implementation of the world-evaluation kernel (fallback backend)."""

import numpy as np


def evaluate_world(n_states, exo_sizes, exo_strides, order, par_ptr, par_idx, par_mult,
                   exo_ptr, exo_idx, exo_mult, tab_ptr, tables, fixed):
    """Values of every observable in every exogenous state under one intervention.

    Returns an ``int32`` array of shape ``(n_states, n_vars)`` holding domain indices.
    ``fixed[v] >= 0`` overrides the mechanism of ``v`` with that value index.
    """
    n_vars = len(order)
    states = np.arange(n_states, dtype=np.int64)
    exo_vals = [(states // exo_strides[j]) % exo_sizes[j] for j in range(len(exo_sizes))]
    out = np.empty((n_states, n_vars), dtype=np.int32)
    for v in order:
        if fixed[v] >= 0:
            out[:, v] = fixed[v]
            continue
        idx = np.zeros(n_states, dtype=np.int64)
        for k in range(par_ptr[v], par_ptr[v + 1]):
            idx += out[:, par_idx[k]].astype(np.int64) * par_mult[k]
        for k in range(exo_ptr[v], exo_ptr[v + 1]):
            idx += exo_vals[exo_idx[k]] * exo_mult[k]
        out[:, v] = tables[tab_ptr[v] + idx]
    return out
