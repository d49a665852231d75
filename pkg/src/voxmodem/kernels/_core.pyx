# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled receiver kernels (see voxmodem.kernels for the contract).

Mirrors numpy_backend bit-for-bit in semantics: same reduction modes,
same dead-branch sentinel, same Jacobian table.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log1p

cnp.import_array()

cdef double NEG_INF = -1.0e30

cdef double[8] _JTABLE
cdef int _i
for _i in range(8):
    _JTABLE[_i] = log1p(exp(-0.5 * _i))


cdef inline double maxstar(double a, double b, int mode) noexcept nogil:
    cdef double hi, lo, d
    if a > b:
        hi = a
        lo = b
    else:
        hi = b
        lo = a
    if mode == 0:
        return hi
    if lo <= NEG_INF / 2:
        return hi
    d = hi - lo
    if mode == 1:
        if d >= 4.0:
            return hi
        return hi + _JTABLE[<int> (2.0 * d)]
    return hi + log1p(exp(-d))


def bcjr_siso(next_state, out_bits, out_llr, in_llr, terminated, mode):
    """Trellis SISO pass; see numpy_backend.bcjr_siso for the contract."""
    cdef cnp.int32_t[:, :] ns = np.ascontiguousarray(next_state, dtype=np.int32)
    cdef cnp.uint8_t[:, :, :] ob = np.ascontiguousarray(out_bits, dtype=np.uint8)
    cdef double[:, :] oll = np.ascontiguousarray(out_llr, dtype=np.float64)
    cdef double[:] ill = np.ascontiguousarray(in_llr, dtype=np.float64)
    cdef int term = 1 if terminated else 0
    cdef int md = mode

    cdef Py_ssize_t n_states = ns.shape[0]
    cdef Py_ssize_t n_out = ob.shape[2]
    cdef Py_ssize_t n_steps = ill.shape[0]
    cdef Py_ssize_t n_pat = 1 << n_out
    if n_out > 16:
        raise ValueError("too many output bits per branch")

    alpha_arr = np.empty((n_steps + 1, n_states), dtype=np.float64)
    in_post_arr = np.empty(n_steps, dtype=np.float64)
    out_post_arr = np.empty((n_steps, n_out), dtype=np.float64)
    beta_arr = np.empty(n_states, dtype=np.float64)
    beta_next_arr = np.empty(n_states, dtype=np.float64)
    pat_sum_arr = np.empty(n_pat, dtype=np.float64)
    # branch output pattern (packed bits) per (state, input)
    pattern_arr = np.zeros((n_states, 2), dtype=np.int32)
    for _s in range(n_states):
        for _b in range(2):
            v = 0
            for _j in range(n_out):
                v |= int(out_bits[_s, _b, _j]) << _j
            pattern_arr[_s, _b] = v
    m1j_arr = np.empty(n_out, dtype=np.float64)
    m0j_arr = np.empty(n_out, dtype=np.float64)

    cdef double[:, :] alpha = alpha_arr
    cdef double[:] in_post = in_post_arr
    cdef double[:, :] out_post = out_post_arr
    cdef double[:] beta = beta_arr
    cdef double[:] beta_next = beta_next_arr
    cdef double[:] pat_sum = pat_sum_arr
    cdef cnp.int32_t[:, :] pattern = pattern_arr
    cdef double[:] m1j = m1j_arr
    cdef double[:] m0j = m0j_arr

    cdef Py_ssize_t k, s, b, j, t, p
    cdef double g, cand, mx, m1, m0, a, bb0, bb1

    with nogil:
        # forward pass
        for s in range(n_states):
            alpha[0, s] = NEG_INF
        alpha[0, 0] = 0.0
        for k in range(n_steps):
            for p in range(n_pat):
                g = 0.0
                for j in range(n_out):
                    if p & (1 << j):
                        g += oll[k, j]
                pat_sum[p] = g
            for s in range(n_states):
                alpha[k + 1, s] = NEG_INF
            for s in range(n_states):
                a = alpha[k, s]
                if a <= NEG_INF / 2:
                    continue
                t = ns[s, 0]
                cand = a + pat_sum[pattern[s, 0]]
                alpha[k + 1, t] = maxstar(alpha[k + 1, t], cand, md)
                t = ns[s, 1]
                cand = a + pat_sum[pattern[s, 1]] + ill[k]
                alpha[k + 1, t] = maxstar(alpha[k + 1, t], cand, md)
            mx = NEG_INF
            for s in range(n_states):
                if alpha[k + 1, s] > mx:
                    mx = alpha[k + 1, s]
            for s in range(n_states):
                alpha[k + 1, s] -= mx

        # backward pass, extracting all posteriors in the same sweep
        for s in range(n_states):
            beta[s] = (NEG_INF if s else 0.0) if term else 0.0
        for k in range(n_steps - 1, -1, -1):
            for p in range(n_pat):
                g = 0.0
                for j in range(n_out):
                    if p & (1 << j):
                        g += oll[k, j]
                pat_sum[p] = g

            m1 = NEG_INF
            m0 = NEG_INF
            for j in range(n_out):
                m1j[j] = NEG_INF
                m0j[j] = NEG_INF
            for s in range(n_states):
                a = alpha[k, s]
                bb0 = pat_sum[pattern[s, 0]] + beta[ns[s, 0]]
                bb1 = pat_sum[pattern[s, 1]] + ill[k] + beta[ns[s, 1]]
                beta_next[s] = maxstar(bb0, bb1, md)
                if a <= NEG_INF / 2:
                    continue
                bb0 += a
                bb1 += a
                m0 = maxstar(m0, bb0, md)
                m1 = maxstar(m1, bb1, md)
                p = pattern[s, 0]
                for j in range(n_out):
                    if p & (1 << j):
                        m1j[j] = maxstar(m1j[j], bb0, md)
                    else:
                        m0j[j] = maxstar(m0j[j], bb0, md)
                p = pattern[s, 1]
                for j in range(n_out):
                    if p & (1 << j):
                        m1j[j] = maxstar(m1j[j], bb1, md)
                    else:
                        m0j[j] = maxstar(m0j[j], bb1, md)
            in_post[k] = m1 - m0
            for j in range(n_out):
                out_post[k, j] = m1j[j] - m0j[j]

            mx = NEG_INF
            for s in range(n_states):
                if beta_next[s] > mx:
                    mx = beta_next[s]
            for s in range(n_states):
                beta[s] = beta_next[s] - mx

    return in_post_arr, out_post_arr


def demap_maxlog(estimates, noise_var, priors, points, point_bits, mode):
    """Bitwise extrinsic LLRs; see numpy_backend.demap_maxlog."""
    cdef double complex[:] z = np.ascontiguousarray(estimates, dtype=np.complex128)
    cdef double[:] nv = np.ascontiguousarray(noise_var, dtype=np.float64)
    cdef double[:, :] pr = np.ascontiguousarray(priors, dtype=np.float64)
    cdef double complex[:] pts = np.ascontiguousarray(points, dtype=np.complex128)
    cdef cnp.uint8_t[:, :] pb = np.ascontiguousarray(point_bits, dtype=np.uint8)
    cdef int md = mode

    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t n_points = pts.shape[0]
    cdef Py_ssize_t q = pb.shape[1]

    ext_arr = np.empty((n, q), dtype=np.float64)
    acc1_arr = np.empty(q, dtype=np.float64)
    acc0_arr = np.empty(q, dtype=np.float64)
    cdef double[:, :] ext = ext_arr
    cdef double[:] acc1 = acc1_arr
    cdef double[:] acc0 = acc0_arr

    cdef Py_ssize_t i, m, j
    cdef double metric, dre, dim
    cdef double complex diff

    with nogil:
        for i in range(n):
            for j in range(q):
                acc1[j] = NEG_INF
                acc0[j] = NEG_INF
            for m in range(n_points):
                diff = z[i] - pts[m]
                dre = diff.real
                dim = diff.imag
                metric = -(dre * dre + dim * dim) / nv[i]
                for j in range(q):
                    if pb[m, j]:
                        metric += pr[i, j]
                for j in range(q):
                    if pb[m, j]:
                        acc1[j] = maxstar(acc1[j], metric, md)
                    else:
                        acc0[j] = maxstar(acc0[j], metric, md)
            for j in range(q):
                ext[i, j] = acc1[j] - acc0[j] - pr[i, j]

    return ext_arr
