"""Channel coding, interleaving and QAM mapping around the equalizer.

Transmit chain for one frame's data field (bit domain):

    info -> convolutional encode (rate-1/2 mother, punctured to R_c)
         -> zero padding up to the frame's bit capacity
         -> pseudorandom interleaver
         -> [turbo_precoded only] rate-1 accumulator, d[n] = u[n] ^ d[n-1]
         -> Gray QAM mapping, q bits per symbol

The receive side exchanges extrinsic LLRs (L = ln P(1)/P(0), clamped to
+/-LLR_MAX) between the soft equalizer and ``ChainDecoder``.  For the
precoded kind the decoder runs a 2-state accumulator SISO against the
outer code's BCJR through the interleaver, which is what turns the
equalizer/decoder loop into a serially concatenated turbo scheme.

Constellations are square Gray-labeled QAM at unit average energy.  A
symbol's q bits are taken most-significant-first: the first q/2 bits
Gray-index the I level, the last q/2 the Q level, with Gray index 0 at
the most positive level.  The tables are frozen as golden fixtures under
tests/golden/.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from voxmodem import kernels
from voxmodem.config import CONVOLUTIONAL, LLR_MAX, TURBO_PRECODED
from voxmodem.prng import cached_permutation

# ---------------------------------------------------------------------------
# bit/byte helpers

def bits_from_bytes(data):
    """Unpack bytes to a uint8 bit array, MSB first."""
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))


def bytes_from_bits(bits):
    """Pack a bit array (length divisible by 8) into bytes, MSB first."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % 8:
        raise ValueError(f"bit count {bits.size} not divisible by 8")
    return np.packbits(bits).tobytes()


def clamp_llr(llrs):
    return np.clip(llrs, -LLR_MAX, LLR_MAX)


# ---------------------------------------------------------------------------
# constellations

def _gray_to_binary(g):
    b = g.copy()
    shift = 1
    while shift < 8:
        b ^= b >> shift
        shift <<= 1
    return b


@lru_cache(maxsize=None)
def constellation(q):
    """(points, point_bits) for Gray 2^q-QAM at unit average energy.

    points[label] is the symbol whose bits (transmit order, MSB first)
    are point_bits[label].  label = sum(bit_i << (q-1-i)).
    """
    if q not in (2, 4, 6):
        raise ValueError(f"q={q}: supported values are 2, 4, 6")
    half = q // 2
    n_levels = 1 << half
    # Gray index g -> level (n_levels-1) - 2*binary(g); g=0 is most positive
    gray = np.arange(n_levels, dtype=np.int64)
    levels = (n_levels - 1) - 2 * _gray_to_binary(gray)

    labels = np.arange(1 << q, dtype=np.int64)
    i_idx = labels >> half
    q_idx = labels & (n_levels - 1)
    raw = levels[i_idx] + 1j * levels[q_idx]
    scale = np.sqrt(np.mean(np.abs(raw) ** 2))
    points = (raw / scale).astype(np.complex128)

    point_bits = ((labels[:, None] >> np.arange(q - 1, -1, -1)[None, :]) & 1).astype(np.uint8)
    return points, point_bits


def qam_map(bits, q):
    """Map a bit array (length divisible by q) to constellation symbols."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % q:
        raise ValueError(f"bit count {bits.size} not divisible by q={q}")
    points, _ = constellation(q)
    weights = 1 << np.arange(q - 1, -1, -1, dtype=np.int64)
    labels = bits.reshape(-1, q).astype(np.int64) @ weights
    return points[labels]


def qam_hard_demap(symbols, q):
    """Nearest-point hard decisions back to bits."""
    points, point_bits = constellation(q)
    symbols = np.asarray(symbols, dtype=np.complex128)
    idx = np.argmin(np.abs(symbols[:, None] - points[None, :]), axis=1)
    return point_bits[idx].reshape(-1)


def qam_soft_demap(estimates, noise_var, priors, q, mode=kernels.MODE_MAXLOG):
    """Extrinsic bit LLRs from symbol estimates (max-log over the points).

    noise_var is the effective complex noise variance, scalar or
    per-symbol.  priors has one LLR per bit of the estimates (length
    q * len(estimates)); each bit's own prior is excluded from its
    extrinsic output while the symbol's other bits' priors participate.
    """
    estimates = np.ascontiguousarray(estimates, dtype=np.complex128)
    nv = np.asarray(noise_var, dtype=np.float64)
    if nv.shape != estimates.shape:
        nv = np.broadcast_to(nv, estimates.shape).copy()
    if np.any(nv <= 0):
        raise ValueError("noise_var must be positive")
    priors = np.asarray(priors, dtype=np.float64)
    if priors.size != q * estimates.size:
        raise ValueError(f"priors length {priors.size} != q*symbols = {q * estimates.size}")
    points, point_bits = constellation(q)
    ext = kernels.demap_maxlog(
        estimates,
        np.ascontiguousarray(nv),
        np.ascontiguousarray(priors.reshape(-1, q)),
        points,
        point_bits,
        mode,
    )
    return clamp_llr(ext.reshape(-1))


# ---------------------------------------------------------------------------
# convolutional mother code, puncturing, accumulator

MOTHER_GENERATORS = (0o133, 0o171)
CONSTRAINT_LENGTH = 7

_PUNCTURE_MASKS = {
    Fraction(1, 2): np.array([1, 1], dtype=bool),
    Fraction(2, 3): np.array([1, 1, 0, 1], dtype=bool),
    Fraction(3, 4): np.array([1, 1, 0, 1, 1, 0], dtype=bool),
}


@dataclass(frozen=True)
class CodeSpec:
    """Channel code selection carried per session."""

    kind: str = CONVOLUTIONAL
    code_rate: Fraction = Fraction(1, 2)
    generators: tuple = MOTHER_GENERATORS
    constraint_length: int = CONSTRAINT_LENGTH
    interleaver_seed: int = 1

    def __post_init__(self):
        if not all(self.generators):
            raise ValueError("generator polynomials must be nonzero")
        if Fraction(self.code_rate) not in _PUNCTURE_MASKS:
            raise ValueError(f"no puncture pattern for rate {self.code_rate}")

    @property
    def puncture_pattern(self):
        return _PUNCTURE_MASKS[Fraction(self.code_rate)]

    @property
    def n_tail(self):
        return self.constraint_length - 1


def _generator_taps(poly, constraint_length):
    # taps[i] multiplies x_{k-i}; taps[0] is the MSB of the polynomial
    return np.array(
        [(poly >> (constraint_length - 1 - i)) & 1 for i in range(constraint_length)],
        dtype=np.uint8,
    )


@lru_cache(maxsize=None)
def conv_trellis(generators=MOTHER_GENERATORS, constraint_length=CONSTRAINT_LENGTH):
    """(next_state, out_bits) tables for the feedforward mother code.

    State s holds the previous K-1 input bits, newest in the top bit.
    """
    k = constraint_length
    n_states = 1 << (k - 1)
    n_out = len(generators)
    next_state = np.empty((n_states, 2), dtype=np.int32)
    out_bits = np.empty((n_states, 2, n_out), dtype=np.uint8)
    for s in range(n_states):
        for b in (0, 1):
            reg = (b << (k - 1)) | s
            next_state[s, b] = (b << (k - 2)) | (s >> 1)
            for j, g in enumerate(generators):
                out_bits[s, b, j] = bin(reg & g).count("1") & 1
    return next_state, out_bits


ACC_NEXT_STATE = np.array([[0, 1], [1, 0]], dtype=np.int32)
ACC_OUT_BITS = np.array([[[0], [1]], [[1], [0]]], dtype=np.uint8)


def _puncture_keep_mask(n_mother, pattern):
    reps = -(-n_mother // pattern.size)
    return np.tile(pattern, reps)[:n_mother]


def punctured_length(n_info, spec):
    """Coded bits emitted for n_info input bits (tail included)."""
    n_mother = 2 * (n_info + spec.n_tail)
    return int(_puncture_keep_mask(n_mother, spec.puncture_pattern).sum())


def max_info_bits(capacity, spec):
    """Largest info length whose punctured output fits in `capacity` bits."""
    guess = int(capacity * Fraction(spec.code_rate)) - spec.n_tail
    while punctured_length(guess + 1, spec) <= capacity:
        guess += 1
    while guess > 0 and punctured_length(guess, spec) > capacity:
        guess -= 1
    if guess <= 0:
        raise ValueError(f"capacity {capacity} too small for rate {spec.code_rate}")
    return guess


def conv_encode(info, spec):
    """Terminated convolutional encoding, punctured to spec.code_rate."""
    if spec.kind not in (CONVOLUTIONAL, TURBO_PRECODED):
        raise ValueError(f"unknown code kind {spec.kind!r}")
    info = np.asarray(info, dtype=np.uint8)
    if info.size == 0:
        raise ValueError("cannot encode an empty bit vector")
    streams = [
        np.convolve(info, _generator_taps(g, spec.constraint_length)) & 1
        for g in spec.generators
    ]
    mother = np.stack(streams, axis=1).reshape(-1).astype(np.uint8)
    keep = _puncture_keep_mask(mother.size, spec.puncture_pattern)
    return mother[keep]


def depuncture(llrs, n_info, spec):
    """Inverse of puncturing: zero LLRs at removed positions."""
    n_mother = 2 * (n_info + spec.n_tail)
    keep = _puncture_keep_mask(n_mother, spec.puncture_pattern)
    full = np.zeros(n_mother)
    full[keep] = llrs
    return full, keep


def precode(bits):
    """Rate-1 accumulator: out[n] = in[n] ^ out[n-1], out[-1] = 0."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        raise ValueError("cannot precode an empty bit vector")
    return np.bitwise_xor.accumulate(bits)


def unprecode(bits):
    bits = np.asarray(bits, dtype=np.uint8)
    out = bits.copy()
    out[1:] ^= bits[:-1]
    return out


# ---------------------------------------------------------------------------
# interleaving

def interleave(bits, seed, length):
    """Pseudorandom permutation determined by (seed, length)."""
    bits = np.asarray(bits)
    if bits.size != length:
        raise ValueError(f"length mismatch: got {bits.size}, declared {length}")
    return bits[cached_permutation(seed, length)]


def deinterleave(bits, seed, length):
    bits = np.asarray(bits)
    if bits.size != length:
        raise ValueError(f"length mismatch: got {bits.size}, declared {length}")
    out = np.empty_like(bits)
    out[cached_permutation(seed, length)] = bits
    return out


# ---------------------------------------------------------------------------
# full chain

def encode_chain(info, spec, capacity):
    """info bits -> the bit stream handed to the QAM mapper (length capacity)."""
    coded = conv_encode(info, spec)
    if coded.size > capacity:
        raise ValueError(f"coded length {coded.size} exceeds capacity {capacity}")
    padded = np.concatenate([coded, np.zeros(capacity - coded.size, dtype=np.uint8)])
    out = interleave(padded, spec.interleaver_seed, capacity)
    if spec.kind == TURBO_PRECODED:
        out = precode(out)
    return out


class ChainDecoder:
    """Soft-in soft-out decoder for one frame's data field.

    ``iterate`` consumes channel LLRs on the mapped bits (transmit
    order) and returns hard info decisions together with extrinsic LLRs
    on the mapped bits for the equalizer.  For the precoded kind the
    outer extrinsic memory persists across calls, which is what makes
    repeated calls turbo iterations.
    """

    def __init__(self, spec, n_info, capacity, mode=kernels.MODE_JACOBIAN,
                 outer_mode=None):
        self.spec = spec
        self.n_info = n_info
        self.capacity = capacity
        self.mode = mode
        # the outer code runs plain Max-Log-MAP by default; the cheap
        # table correction matters most in the accumulator/demap loop
        self.outer_mode = kernels.MODE_MAXLOG if outer_mode is None else outer_mode
        self.coded_len = punctured_length(n_info, spec)
        if self.coded_len > capacity:
            raise ValueError("info length does not fit the capacity")
        self.perm = cached_permutation(spec.interleaver_seed, capacity)
        # interleaved-domain positions holding known zero padding
        self.pad_known = self.perm >= self.coded_len
        self.next_state, self.out_bits = conv_trellis(
            spec.generators, spec.constraint_length
        )
        self.outer_ext = np.where(self.pad_known, -LLR_MAX, 0.0)
        self.info_posterior = None

    def reset(self):
        self.outer_ext = np.where(self.pad_known, -LLR_MAX, 0.0)
        self.info_posterior = None

    def _outer_decode(self, coded_llrs):
        """BCJR on the mother trellis; returns (info_hard, ext_on_coded)."""
        mother, keep = depuncture(coded_llrs, self.n_info, self.spec)
        pairs = mother.reshape(-1, 2)
        in_llr = np.zeros(pairs.shape[0])
        in_post, out_post = kernels.bcjr_siso(
            self.next_state, self.out_bits, np.ascontiguousarray(pairs),
            in_llr, True, self.outer_mode,
        )
        self.info_posterior = in_post[: self.n_info]
        info_hard = (self.info_posterior > 0).astype(np.uint8)
        ext_mother = out_post.reshape(-1) - mother
        return info_hard, clamp_llr(ext_mother[keep])

    def _acc_siso(self, channel_llrs, in_prior):
        in_post, out_post = kernels.bcjr_siso(
            ACC_NEXT_STATE, ACC_OUT_BITS,
            np.ascontiguousarray(channel_llrs.reshape(-1, 1)),
            np.ascontiguousarray(in_prior), False, self.mode,
        )
        return in_post, out_post[:, 0]

    def iterate(self, channel_llrs):
        """One decoder activation. Returns (info_hard, extrinsic_mapped)."""
        channel_llrs = np.asarray(channel_llrs, dtype=np.float64)
        if channel_llrs.size != self.capacity:
            raise ValueError(
                f"LLR length {channel_llrs.size} != coded length {self.capacity}"
            )
        if self.spec.kind == TURBO_PRECODED:
            in_post, _ = self._acc_siso(channel_llrs, self.outer_ext)
            ext_in = clamp_llr(in_post - self.outer_ext)
            deint = np.empty(self.capacity)
            deint[self.perm] = ext_in
            info_hard, ext_coded = self._outer_decode(deint[: self.coded_len])
            padded = np.full(self.capacity, -LLR_MAX)
            padded[: self.coded_len] = ext_coded
            self.outer_ext = padded[self.perm]
            _, out_post = self._acc_siso(channel_llrs, self.outer_ext)
            ext_mapped = clamp_llr(out_post - channel_llrs)
        else:
            deint = np.empty(self.capacity)
            deint[self.perm] = channel_llrs
            info_hard, ext_coded = self._outer_decode(deint[: self.coded_len])
            padded = np.full(self.capacity, -LLR_MAX)
            padded[: self.coded_len] = ext_coded
            ext_mapped = padded[self.perm]
        return info_hard, ext_mapped


def decode(llrs, spec, emit_extrinsic=True, n_info=None, mode=kernels.MODE_MAXLOG):
    """One-shot decode of channel LLRs given in transmitted bit order.

    Runs a single decoder activation (Max-Log-MAP by default) and
    returns (info_bits, extrinsic) with the extrinsic LLRs on the coded
    bits in the same transmitted order, ready to feed back to the
    equalizer.  n_info defaults to the largest message the LLR length
    can carry.
    """
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.size == 0:
        raise ValueError("empty LLR vector")
    if n_info is None:
        n_info = max_info_bits(llrs.size, spec)
    dec = ChainDecoder(spec, n_info, llrs.size, mode=mode, outer_mode=mode)
    info, ext = dec.iterate(llrs)
    return (info, ext) if emit_extrinsic else (info, None)
