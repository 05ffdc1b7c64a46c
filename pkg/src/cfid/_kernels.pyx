# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled world-evaluation kernel; same contract as ``_kernels_py.evaluate_world``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def evaluate_world(Py_ssize_t n_states, cnp.int64_t[::1] exo_sizes, cnp.int64_t[::1] exo_strides,
                   cnp.int64_t[::1] order, cnp.int64_t[::1] par_ptr, cnp.int64_t[::1] par_idx,
                   cnp.int64_t[::1] par_mult, cnp.int64_t[::1] exo_ptr, cnp.int64_t[::1] exo_idx,
                   cnp.int64_t[::1] exo_mult, cnp.int64_t[::1] tab_ptr, cnp.int32_t[::1] tables,
                   cnp.int32_t[::1] fixed):
    cdef Py_ssize_t n_vars = order.shape[0]
    cdef Py_ssize_t n_exo = exo_sizes.shape[0]
    out_arr = np.empty((n_states, n_vars), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] out = out_arr
    cdef cnp.int64_t[::1] u = np.zeros(max(n_exo, 1), dtype=np.int64)
    cdef Py_ssize_t s, j, i, k, v
    cdef cnp.int64_t idx
    # exogenous states are visited in mixed-radix order with the last variable fastest,
    # so u is advanced like an odometer instead of being decoded from s
    for s in range(n_states):
        if s > 0:
            j = n_exo - 1
            while j >= 0:
                u[j] += 1
                if u[j] < exo_sizes[j]:
                    break
                u[j] = 0
                j -= 1
        for i in range(n_vars):
            v = order[i]
            if fixed[v] >= 0:
                out[s, v] = fixed[v]
                continue
            idx = 0
            for k in range(par_ptr[v], par_ptr[v + 1]):
                idx += out[s, par_idx[k]] * par_mult[k]
            for k in range(exo_ptr[v], exo_ptr[v + 1]):
                idx += u[exo_idx[k]] * exo_mult[k]
            out[s, v] = tables[tab_ptr[v] + idx]
    return out_arr
