# Compiled contraction core: multiply factors sharing one wire, sum it out.
#
# The output assignment space is walked in Gray-code order so each step
# flips a single output bit and every factor's flat offset is updated in
# O(1); per output element the work is two products over the factors (the
# summed wire at 0 and at 1).

import numpy as np


def sum_product_pair(double[::1] buf, long long[::1] offsets,
                     long long[:, ::1] strides_lsb, long long[::1] z_strides,
                     int out_bits):
    """See kernels.sum_product_pair; buf holds all tables back to back."""
    cdef Py_ssize_t r = z_strides.shape[0]
    cdef Py_ssize_t n_out = 1 << out_bits
    out_arr = np.empty(n_out, dtype=np.float64)
    cdef double[::1] out = out_arr
    cur_arr = np.zeros(r, dtype=np.int64)
    cdef long long[::1] cur = cur_arr
    cdef Py_ssize_t i, j, b
    cdef unsigned long long g = 0, nxt
    cdef long long idx
    cdef double p0, p1
    for i in range(n_out):
        p0 = 1.0
        p1 = 1.0
        for j in range(r):
            idx = offsets[j] + cur[j]
            p0 *= buf[idx]
            p1 *= buf[idx + z_strides[j]]
        out[g] = p0 + p1
        if i + 1 < n_out:
            nxt = i + 1
            b = 0
            while not (nxt & 1):
                nxt >>= 1
                b += 1
            if (g >> b) & 1:
                g ^= <unsigned long long> 1 << b
                for j in range(r):
                    cur[j] -= strides_lsb[j, b]
            else:
                g ^= <unsigned long long> 1 << b
                for j in range(r):
                    cur[j] += strides_lsb[j, b]
    return out_arr
