"""Turbo equalization: training-based channel estimation plus iterative
soft-interference-cancellation MMSE equalization against the decoder.

Discrete model (symbol-spaced, after the matched filter):

    r_n = sum_{k=-K_f}^{K_p} h_{n,k} x_{n-k} + w_n

with precursor length K_f, postcursor length K_p and complex white
noise w.  Taps are least-squares fitted on each training block and
linearly interpolated across the frame.

The equalizer turns decoder priors into symbol means and variances,
cancels the interferers' means from a window of received samples and
applies a linear MMSE filter recomputed once per data block (average
symbol variance, block-center channel taps).  The filter output for
symbol n is modeled as mu*x_n + CN(0, mu*(1-mu)); after dividing out
the bias mu the effective noise variance is (1-mu)/mu and the
normalized estimate is soft-demapped to extrinsic bit LLRs (the target
bit's own prior excluded).  One equalizer pass plus one decoder
activation is one turbo iteration; iterations stop on a hard-decision
fixed point, a payload CRC pass, or max_iters.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from voxmodem import coding, kernels
from voxmodem.config import LLR_MAX

DEFAULT_K_F = 2
DEFAULT_K_P = 5
FILTER_LEN_FACTOR = 3
SNR_CEILING_DB = 60.0


@dataclass
class ChannelEstimate:
    """Per-training-block tap estimates, interpolated in time."""

    taps_blocks: np.ndarray      # (n_blocks, L) complex
    block_centers: np.ndarray    # (n_blocks,) symbol positions
    k_f: int
    k_p: int
    noise_var_blocks: np.ndarray  # (n_blocks,)

    @property
    def n_taps(self):
        return self.k_f + self.k_p + 1

    @property
    def noise_var(self):
        return float(np.mean(self.noise_var_blocks))

    def taps_at(self, position):
        """Linearly interpolated taps at a symbol position."""
        centers = self.block_centers
        if len(centers) == 1:
            return self.taps_blocks[0]
        taps = np.empty(self.n_taps, dtype=np.complex128)
        for j in range(self.n_taps):
            col = self.taps_blocks[:, j]
            taps[j] = np.interp(position, centers, col.real) + 1j * np.interp(
                position, centers, col.imag
            )
        return taps

    def noise_var_at(self, position):
        return float(np.interp(position, self.block_centers, self.noise_var_blocks))

    def snr_db(self):
        """Symbol-domain SNR estimate sum|h|^2 / sigma^2 in dB."""
        gain = np.mean(np.sum(np.abs(self.taps_blocks) ** 2, axis=1))
        nv = max(self.noise_var, 1e-12)
        return min(10.0 * np.log10(max(gain, 1e-12) / nv), SNR_CEILING_DB)


def estimate_channel(rx_train, tx_train, k_f=DEFAULT_K_F, k_p=DEFAULT_K_P):
    """Least-squares channel fit over one block of known symbols.

    Only rows whose full channel span lies inside the block are used,
    so neighboring unknown symbols cannot contaminate the fit.  Returns
    (taps, noise_var) with taps[j] = h_{j - k_f} and noise_var the
    residual power per observation.
    """
    rx = np.asarray(rx_train, dtype=np.complex128)
    tx = np.asarray(tx_train, dtype=np.complex128)
    if rx.shape != tx.shape:
        raise ValueError("rx/tx training length mismatch")
    n_taps = k_f + k_p + 1
    if len(tx) < 4 * n_taps:
        raise ValueError(
            f"training block of {len(tx)} symbols too short for {n_taps} taps"
        )
    rows = np.arange(k_p, len(tx) - k_f)
    # design matrix column j multiplies h_{j-k_f} via x_{n+k_f-j}
    design = np.stack([tx[rows + k_f - j] for j in range(n_taps)], axis=1)
    h, residuals, rank, _ = np.linalg.lstsq(design, rx[rows], rcond=None)
    if rank < n_taps:
        raise ValueError("rank-deficient training regression (degenerate block)")
    resid = rx[rows] - design @ h
    dof = max(len(rows) - n_taps, 1)
    noise_var = float(np.sum(np.abs(resid) ** 2) / dof)
    return h, noise_var


def estimate_frame_channel(symbols, training_slices, training_values,
                           k_f=DEFAULT_K_F, k_p=DEFAULT_K_P):
    """Assemble a ChannelEstimate from the frame's training blocks."""
    taps = []
    centers = []
    noise = []
    for (start, stop), tx in zip(training_slices, training_values):
        h, nv = estimate_channel(symbols[start:stop], tx, k_f, k_p)
        taps.append(h)
        centers.append((start + stop - 1) / 2.0)
        noise.append(nv)
    return ChannelEstimate(
        taps_blocks=np.asarray(taps),
        block_centers=np.asarray(centers, dtype=np.float64),
        k_f=k_f,
        k_p=k_p,
        noise_var_blocks=np.asarray(noise),
    )


def soft_symbol_stats(priors, q):
    """Symbol means and variances from per-bit prior LLRs.

    priors: (n, q). Returns (means (n,), variances (n,)).
    """
    points, point_bits = coding.constellation(q)
    if not np.any(priors):
        # uniform priors: zero mean, unit energy constellation
        n = priors.shape[0]
        return np.zeros(n, dtype=np.complex128), np.ones(n)
    w = np.clip(priors, -LLR_MAX, LLR_MAX) @ point_bits.T.astype(np.float64)
    w -= w.max(axis=1, keepdims=True)
    p = np.exp(w)
    p /= p.sum(axis=1, keepdims=True)
    means = p @ points
    variances = p @ (np.abs(points) ** 2) - np.abs(means) ** 2
    return means, np.maximum(variances, 0.0)


def mmse_filter(taps, noise_var, avg_var, k_f, filter_len):
    """Per-block MMSE filter with the target symbol at unit variance.

    Returns (f, mu, m_min): f spans window offsets -n1..n2, mu is the
    output bias f^H s, m_min the first symbol offset covered by the
    window (used for alignment by the caller).
    """
    n_taps = len(taps)
    n1 = filter_len // 2
    n2 = filter_len - 1 - n1
    m_min = -n1 + k_f - n_taps + 1
    m_max = n2 + k_f
    n_cols = m_max - m_min + 1
    conv = np.zeros((filter_len, n_cols), dtype=np.complex128)
    for a in range(filter_len):
        o = a - n1
        for j in range(n_taps):
            m = o + k_f - j
            conv[a, m - m_min] = taps[j]
    s = conv[:, -m_min].copy()
    sigma = noise_var * np.eye(filter_len) + avg_var * (conv @ conv.conj().T)
    sigma += (1.0 - avg_var) * np.outer(s, s.conj())
    f = np.linalg.solve(sigma, s)
    mu = float(np.real(np.vdot(f, s)))
    mu = min(max(mu, 1e-9), 1.0 - 1e-9)
    return f, mu, m_min


def mmse_symbol_estimates(r, est, priors, q, data_index=None, known_values=None,
                          filter_len=None, blocks=None):
    """Soft-IC MMSE estimates for the data symbols of a frame grid.

    r: full symbol grid observations.  priors: LLRs (len q * n_data) in
    data order.  known_values: complex grid values at non-data
    positions (training/preamble/signal), zero elsewhere.  blocks:
    optional list of (start, stop) grid runs to equalize per filter;
    defaults to one run per contiguous stretch of data positions.

    Returns (z, noise_eff) for the data positions: bias-normalized
    estimates and their effective complex noise variances.
    """
    r = np.asarray(r, dtype=np.complex128)
    n_grid = len(r)
    if data_index is None:
        data_index = np.arange(n_grid)
    data_index = np.asarray(data_index, dtype=np.int64)
    priors = np.asarray(priors, dtype=np.float64).reshape(len(data_index), q)

    filter_len = filter_len or FILTER_LEN_FACTOR * est.n_taps
    means, variances = soft_symbol_stats(priors, q)

    xbar = np.zeros(n_grid, dtype=np.complex128)
    var = np.zeros(n_grid)
    if known_values is not None:
        xbar[:] = known_values
    xbar[data_index] = means
    var[data_index] = variances

    if blocks is None:
        splits = np.where(np.diff(data_index) > 1)[0] + 1
        runs = np.split(data_index, splits)
        blocks = [(int(run[0]), int(run[-1]) + 1) for run in runs]

    pos_map = np.full(n_grid, -1, dtype=np.int64)
    pos_map[data_index] = np.arange(len(data_index))
    z = np.empty(len(data_index), dtype=np.complex128)
    noise_eff = np.empty(len(data_index))

    n1 = filter_len // 2
    n2 = filter_len - 1 - n1
    k_f = est.k_f
    n_taps = est.n_taps
    pad = n1 + n2 + n_taps  # window + channel margin around each block

    filter_cache = {}
    for start, stop in blocks:
        center = (start + stop - 1) / 2.0
        taps = est.taps_at(center)
        nv = max(est.noise_var_at(center), 1e-12)
        vbar = float(np.mean(var[start:stop]))
        key = (taps.tobytes(), round(nv, 12), round(vbar, 9))
        cached = filter_cache.get(key)
        if cached is None:
            cached = mmse_filter(taps, nv, vbar, k_f, filter_len)
            filter_cache[key] = cached
        f, mu, _ = cached

        lo = max(start - pad, 0)
        hi = min(stop + pad, n_grid)
        seg_r = r[lo:hi]
        seg_x = xbar[lo:hi]
        # u[n] = r[n] - sum_j taps[j] * xbar[n + k_f - j]
        conv_x = fftconvolve(seg_x, taps)
        idx = np.arange(len(seg_r))
        u = seg_r - conv_x[np.minimum(idx + k_f, len(conv_x) - 1)]
        # c[n] = sum_o conj(f[o]) u[n+o], o in [-n1, n2]
        c_full = fftconvolve(u, np.conj(f[::-1]))

        ps = np.arange(start, stop)
        out = pos_map[ps]
        if np.any(out < 0):
            raise ValueError("equalizer block covers non-data positions")
        z[out] = (c_full[ps - lo + n2] + mu * xbar[ps]) / mu
        noise_eff[out] = (1.0 - mu) / mu

    return z, noise_eff


def mmse_equalize(r, est, priors, q, data_index=None, known_values=None,
                  filter_len=None, blocks=None, mode=kernels.MODE_JACOBIAN):
    """Extrinsic LLRs on the data symbols' coded bits.

    The target bit's prior is excluded in the demapper; priors of the
    symbol's other bits participate in the symbol metric.
    """
    priors = np.asarray(priors, dtype=np.float64)
    z, noise_eff = mmse_symbol_estimates(
        r, est, priors, q, data_index=data_index, known_values=known_values,
        filter_len=filter_len, blocks=blocks,
    )
    return coding.qam_soft_demap(z, noise_eff, priors, q, mode=mode)


def turbo_receive(r, est, spec, max_iters=8, *, q, n_info=None, data_index=None,
                  known_values=None, crc_check=None, collect=None,
                  mode=kernels.MODE_JACOBIAN):
    """Iterate equalizer and decoder until convergence.

    Stops early when the hard info decisions repeat (fixed point) or
    crc_check(info_bits) returns True.  Returns
    (info_bits, iterations_used, soft_margin) with soft_margin the mean
    magnitude of the decoder's info posterior at the final iteration.

    collect, if given, is called as collect(iteration, info_bits,
    soft_margin) after every iteration (diagnostics hook).
    """
    n_data = len(data_index) if data_index is not None else len(r)
    capacity = q * n_data
    if n_info is None:
        n_info = coding.max_info_bits(capacity, spec)
    decoder = coding.ChainDecoder(spec, n_info, capacity, mode=mode)
    priors = np.zeros(capacity)
    previous = None
    info = np.zeros(n_info, dtype=np.uint8)
    margin = 0.0
    iters_used = 0

    for iteration in range(1, max_iters + 1):
        iters_used = iteration
        eq_ext = mmse_equalize(
            r, est, priors, q, data_index=data_index, known_values=known_values,
            mode=mode,
        )
        info, dec_ext = decoder.iterate(eq_ext)
        priors = dec_ext
        margin = float(np.mean(np.abs(decoder.info_posterior)))
        if collect is not None:
            collect(iteration, info, margin)
        if crc_check is not None and crc_check(info):
            break
        if previous is not None and np.array_equal(previous, info):
            break
        previous = info.copy()

    return info, iters_used, margin
