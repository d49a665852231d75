"""Pure numpy implementations of the hot receiver kernels.

Semantics match ``voxmodem.kernels._core`` (see the package docstring
for the reduction modes).  LLR convention throughout: L = ln P(1)/P(0).
"""

import numpy as np

NEG_INF = -1.0e30

# corr(d) = log(1 + exp(-d)) sampled at d = 0.0, 0.5, ..., 3.5
_JACOBIAN_TABLE = np.log1p(np.exp(-0.5 * np.arange(8)))


def _maxstar_pair(a, b, mode):
    """Elementwise max*(a, b) for the given reduction mode."""
    m = np.maximum(a, b)
    if mode == 0:
        return m
    d = np.abs(a - b)
    # dead branches (the -1e30 sentinel) take no correction
    live = (np.minimum(a, b) > NEG_INF / 2) & (d < 4.0 if mode == 1 else True)
    if mode == 1:
        idx = (2.0 * np.where(live, d, 0.0)).astype(np.int64)
        return m + np.where(live, _JACOBIAN_TABLE[np.minimum(idx, 7)], 0.0)
    return m + np.where(live, np.log1p(np.exp(-np.where(live, d, 0.0))), 0.0)


def _maxstar_reduce(values, mode):
    """Sequential pairwise max* along the last axis."""
    acc = values[..., 0]
    for i in range(1, values.shape[-1]):
        acc = _maxstar_pair(acc, values[..., i], mode)
    return acc


def _predecessors(next_state):
    """Invert the trellis: for each state the (prev_state, input_bit) pairs."""
    n_states = next_state.shape[0]
    prev_state = np.empty((n_states, 2), dtype=np.int64)
    prev_bit = np.empty((n_states, 2), dtype=np.int64)
    count = np.zeros(n_states, dtype=np.int64)
    for s in range(n_states):
        for b in range(2):
            t = next_state[s, b]
            prev_state[t, count[t]] = s
            prev_bit[t, count[t]] = b
            count[t] += 1
    if not np.all(count == 2):
        raise ValueError("trellis is not 2-regular")
    return prev_state, prev_bit


def bcjr_siso(next_state, out_bits, out_llr, in_llr, terminated, mode):
    """Soft-in soft-out trellis pass (BCJR with selectable reduction).

    next_state: (S, 2) int32, successor of state s on input bit b.
    out_bits:   (S, 2, n_out) uint8, branch output bits.
    out_llr:    (N, n_out) float64, priors on output bits.
    in_llr:     (N,) float64, priors on input bits.
    terminated: True if the encoder was flushed back to state 0.

    Returns (in_post, out_post): posterior LLRs on input bits (N,) and
    output bits (N, n_out).  The trellis starts in state 0.
    """
    next_state = np.asarray(next_state, dtype=np.int64)
    out_bits_f = np.asarray(out_bits, dtype=np.float64)
    out_llr = np.asarray(out_llr, dtype=np.float64)
    in_llr = np.asarray(in_llr, dtype=np.float64)
    n_steps = in_llr.shape[0]
    n_states = next_state.shape[0]

    # gamma[k, s, b] = b * in_llr[k] + sum_j out_bits[s, b, j] * out_llr[k, j]
    gamma = np.einsum("kj,sbj->ksb", out_llr, out_bits_f)
    gamma[:, :, 1] += in_llr[:, None]

    prev_state, prev_bit = _predecessors(next_state)

    alpha = np.empty((n_steps + 1, n_states))
    alpha[0].fill(NEG_INF)
    alpha[0, 0] = 0.0
    for k in range(n_steps):
        cand = alpha[k][prev_state] + gamma[k][prev_state, prev_bit]
        a = _maxstar_reduce(cand, mode)
        alpha[k + 1] = a - a.max()

    beta = np.empty(n_states)
    if terminated:
        beta.fill(NEG_INF)
        beta[0] = 0.0
    else:
        beta.fill(0.0)

    in_post = np.empty(n_steps)
    out_post = np.empty((n_steps, out_llr.shape[1]))
    out_sel = out_bits_f.reshape(n_states * 2, -1) > 0.5
    for k in range(n_steps - 1, -1, -1):
        branch = alpha[k][:, None] + gamma[k] + beta[next_state]
        flat = branch.reshape(-1)
        in_post[k] = _maxstar_reduce(branch[:, 1], mode) - _maxstar_reduce(branch[:, 0], mode)
        for j in range(out_llr.shape[1]):
            sel = out_sel[:, j]
            out_post[k, j] = _maxstar_reduce(flat[sel], mode) - _maxstar_reduce(flat[~sel], mode)
        b = _maxstar_reduce(gamma[k] + beta[next_state], mode)
        beta = b - b.max()

    return in_post, out_post


def demap_maxlog(estimates, noise_var, priors, points, point_bits, mode):
    """Bitwise extrinsic LLRs from symbol estimates over a constellation.

    estimates:  (N,) complex128 symbol observations.
    noise_var:  (N,) float64 per-symbol effective complex noise variance.
    priors:     (N, q) float64 prior LLRs on the symbol's bits.
    points:     (M,) complex128 constellation, indexed by integer label.
    point_bits: (M, q) uint8, bit j of each label (transmit order).

    Returns (N, q) extrinsic LLRs: the prior of the target bit is
    excluded, priors of the symbol's other bits participate.
    """
    estimates = np.asarray(estimates, dtype=np.complex128)
    noise_var = np.asarray(noise_var, dtype=np.float64)
    priors = np.asarray(priors, dtype=np.float64)
    bits_f = np.asarray(point_bits, dtype=np.float64)

    d2 = np.abs(estimates[:, None] - points[None, :]) ** 2
    metric = -d2 / noise_var[:, None] + priors @ bits_f.T

    q = priors.shape[1]
    ext = np.empty((len(estimates), q))
    for j in range(q):
        sel = bits_f[:, j] > 0.5
        post1 = _maxstar_reduce(metric[:, sel], mode)
        post0 = _maxstar_reduce(metric[:, ~sel], mode)
        ext[:, j] = post1 - post0 - priors[:, j]
    return ext
