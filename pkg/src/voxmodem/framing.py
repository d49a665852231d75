"""On-air frame: preamble, signal field, training and data blocks.

Frame grid (symbol indices, defaults in parentheses):

    [ preamble (63) | signal field x3 (3*17) | (train (32) | data (256)) x n (8) ]

Every frame has the same symbol count regardless of operating point, so
the receiver can sample the whole grid before it knows the payload
format.  The preamble is a length-63 m-sequence (LFSR x^6 + x + 1,
seed 0b100001) sent as BPSK (bit 0 -> +1, bit 1 -> -1).  Training
blocks are known QPSK symbols from the session-seeded PRNG.

Signal field (33 bits, most-significant-bit first):
    q_index:3 | mode_index:3 | symrate_index:3 | payload_len:16 | crc8:8
mode_index enumerates (code kind, code rate) pairs: 0..2 are the
convolutional rates 1/2, 2/3, 3/4 and 4..6 the same rates precoded.
The CRC-8 uses polynomial 0x07, init 0, no reflection.  The 33 bits
plus one zero pad bit are sent as 17 uncoded QPSK symbols, repeated
three times; the receiver takes a bitwise majority vote before the CRC
check.  No channel code is applied: QPSK plus triple repetition is the
robust bootstrap mode, and it keeps the field at 17 symbols per copy.

The data field carries payload_capacity user payload bits (zero-padded
up to capacity) followed by a CRC-32 (polynomial 0x04C11DB7 reflected,
i.e. zlib.crc32 over the MSB-first packed bytes) that the receiver uses
both for drop accounting and as the turbo stop criterion.
"""

import zlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from voxmodem import coding
from voxmodem.config import CODE_RATES, CODE_KINDS, Q_VALUES, SYMBOL_RATES
from voxmodem.prng import Xoshiro256StarStar, derive_seed

PREAMBLE_LEN = 63
SIGNAL_REPS = 3
SIGNAL_BITS = 33
SIGNAL_SYMBOLS = 17  # ceil(33 / 2) QPSK symbols
FRAME_CRC_BITS = 32

_TAG_INTERLEAVER = 0x1EAF
_TAG_TRAINING = 0x7A17

_MODE_TABLE = [(kind, rate) for kind in CODE_KINDS for rate in CODE_RATES]


def crc8(bits):
    """CRC-8, polynomial 0x07, init 0x00, MSB-first, no reflection."""
    crc = 0
    for b in np.asarray(bits, dtype=np.uint8):
        msb = (crc >> 7) & 1
        crc = (crc << 1) & 0xFF
        if msb ^ int(b):
            crc ^= 0x07
    return crc


def payload_crc_bits(payload_bits):
    """CRC-32 of a bit vector (packed MSB-first, zero-padded to bytes)."""
    packed = np.packbits(np.asarray(payload_bits, dtype=np.uint8)).tobytes()
    value = zlib.crc32(packed) & 0xFFFFFFFF
    return coding.bits_from_bytes(value.to_bytes(4, "big"))


@lru_cache(maxsize=1)
def preamble_symbols():
    """63-chip m-sequence as BPSK symbols."""
    reg = 0b100001
    bits = np.empty(PREAMBLE_LEN, dtype=np.uint8)
    for i in range(PREAMBLE_LEN):
        bits[i] = reg & 1
        feedback = ((reg >> 1) ^ reg) & 1
        reg = (reg >> 1) | (feedback << 5)
    return (1.0 - 2.0 * bits.astype(np.float64)).astype(np.complex128)


def training_symbols(session_seed, block_index, length):
    """Deterministic known QPSK block (constant modulus)."""
    rng = Xoshiro256StarStar(derive_seed(session_seed, _TAG_TRAINING, block_index))
    return coding.qam_map(rng.bits(2 * length), 2)


def interleaver_seed(session_seed):
    return derive_seed(session_seed, _TAG_INTERLEAVER)


def make_code_spec(config, session_seed):
    return coding.CodeSpec(
        kind=config.code_kind,
        code_rate=config.code_rate,
        interleaver_seed=interleaver_seed(session_seed),
    )


@dataclass(frozen=True)
class FrameLayout:
    """Symbol-level frame geometry plus the resulting payload capacity."""

    preamble_len: int = PREAMBLE_LEN
    signal_len: int = SIGNAL_SYMBOLS
    signal_reps: int = SIGNAL_REPS
    n_training_sets: int = 8
    training_block_len: int = 32
    data_block_len: int = 256
    payload_len: int = 0  # user payload bits per frame, set by for_config

    @classmethod
    def for_config(cls, config, **kwargs):
        """Layout for an operating point; payload_len derived from (q, R_c)."""
        base = cls(**kwargs)
        spec = coding.CodeSpec(kind=config.code_kind, code_rate=config.code_rate)
        capacity = config.q * base.n_training_sets * base.data_block_len
        n_info = coding.max_info_bits(capacity, spec)
        if n_info <= FRAME_CRC_BITS:
            raise ValueError("frame too small to carry the payload CRC")
        return cls(**{**kwargs, "payload_len": n_info - FRAME_CRC_BITS})

    @property
    def header_len(self):
        return self.preamble_len + self.signal_reps * self.signal_len

    @property
    def n_data_symbols(self):
        return self.n_training_sets * self.data_block_len

    @property
    def n_symbols(self):
        return self.header_len + self.n_training_sets * (
            self.training_block_len + self.data_block_len
        )

    @property
    def n_info_bits(self):
        return self.payload_len + FRAME_CRC_BITS

    def bit_capacity(self, q):
        return q * self.n_data_symbols

    def payload_len_for(self, q, spec):
        """User payload capacity for an arbitrary (q, code) combination."""
        n_info = coding.max_info_bits(self.bit_capacity(q), spec)
        return n_info - FRAME_CRC_BITS

    def training_positions(self):
        """(train_indices, data_indices) partitioning the post-header grid."""
        train = []
        data = []
        pos = self.header_len
        for _ in range(self.n_training_sets):
            train.append(np.arange(pos, pos + self.training_block_len))
            pos += self.training_block_len
            data.append(np.arange(pos, pos + self.data_block_len))
            pos += self.data_block_len
        return np.concatenate(train), np.concatenate(data)

    def training_block_slices(self):
        starts = self.header_len + np.arange(self.n_training_sets) * (
            self.training_block_len + self.data_block_len
        )
        return [(int(s), int(s + self.training_block_len)) for s in starts]

    def data_block_slices(self):
        starts = self.header_len + self.training_block_len + np.arange(
            self.n_training_sets
        ) * (self.training_block_len + self.data_block_len)
        return [(int(s), int(s + self.data_block_len)) for s in starts]

    def symbol_overhead_fraction(self):
        """Fraction of frame symbols that are not data symbols."""
        return 1.0 - self.n_data_symbols / self.n_symbols


@dataclass(frozen=True)
class SignalField:
    q_index: int
    mode_index: int
    symrate_index: int
    payload_len: int

    @classmethod
    def for_config(cls, config, payload_len):
        kind_rates = (config.code_kind, config.code_rate)
        return cls(
            q_index=Q_VALUES.index(config.q),
            mode_index=_MODE_TABLE.index(kind_rates),
            symrate_index=SYMBOL_RATES.index(config.symbol_rate),
            payload_len=payload_len,
        )

    @property
    def q(self):
        return Q_VALUES[self.q_index]

    @property
    def code_kind(self):
        return _MODE_TABLE[self.mode_index][0]

    @property
    def code_rate(self):
        return _MODE_TABLE[self.mode_index][1]

    @property
    def symbol_rate(self):
        return SYMBOL_RATES[self.symrate_index]

    def to_bits(self):
        header = np.concatenate([
            _int_bits(self.q_index, 3),
            _int_bits(self.mode_index, 3),
            _int_bits(self.symrate_index, 3),
            _int_bits(self.payload_len, 16),
        ])
        return np.concatenate([header, _int_bits(crc8(header), 8)])

    @classmethod
    def from_bits(cls, bits):
        """Decode and CRC-check 33 field bits; None when the CRC fails."""
        bits = np.asarray(bits, dtype=np.uint8)
        header, crc = bits[:25], bits[25:33]
        if crc8(header) != _bits_int(crc):
            return None
        field = cls(
            q_index=_bits_int(header[0:3]),
            mode_index=_bits_int(header[3:6]),
            symrate_index=_bits_int(header[6:9]),
            payload_len=_bits_int(header[9:25]),
        )
        if field.q_index >= len(Q_VALUES) or field.mode_index >= len(_MODE_TABLE):
            return None
        if field.symrate_index >= len(SYMBOL_RATES):
            return None
        return field


def _int_bits(value, width):
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def _bits_int(bits):
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def signal_field_symbols(field):
    """One 17-symbol QPSK copy of the field (33 bits + 1 zero pad bit)."""
    bits = np.concatenate([field.to_bits(), np.zeros(1, dtype=np.uint8)])
    return coding.qam_map(bits, 2)


def parse_signal_field(symbols):
    """Majority-vote the repetitions, then CRC-check.

    `symbols` holds signal_reps * 17 equalized symbols.  Returns a
    SignalField or None (a None is a frame drop).
    """
    symbols = np.asarray(symbols, dtype=np.complex128)
    reps = symbols.reshape(SIGNAL_REPS, SIGNAL_SYMBOLS)
    votes = np.stack([
        coding.qam_hard_demap(rep, 2)[:SIGNAL_BITS] for rep in reps
    ])
    majority = (votes.sum(axis=0) * 2 > SIGNAL_REPS).astype(np.uint8)
    return SignalField.from_bits(majority)


def build_frame(payload_bits, config, layout, session_seed):
    """Assemble one frame's symbol sequence from user payload bits.

    The payload is zero-padded to layout.payload_len, a CRC-32 is
    appended, the whole block is channel-coded and the coded bits fill
    the data blocks in order.
    """
    payload_bits = np.asarray(payload_bits, dtype=np.uint8)
    if payload_bits.size > layout.payload_len:
        raise ValueError(
            f"payload of {payload_bits.size} bits exceeds frame capacity {layout.payload_len}"
        )
    padded = np.zeros(layout.payload_len, dtype=np.uint8)
    padded[: payload_bits.size] = payload_bits
    info = np.concatenate([padded, payload_crc_bits(padded)])

    spec = make_code_spec(config, session_seed)
    mapped = coding.encode_chain(info, spec, layout.bit_capacity(config.q))
    data_syms = coding.qam_map(mapped, config.q)

    field = SignalField.for_config(config, payload_bits.size)
    sig = signal_field_symbols(field)

    parts = [preamble_symbols()] + [sig] * layout.signal_reps
    for i in range(layout.n_training_sets):
        parts.append(training_symbols(session_seed, i, layout.training_block_len))
        parts.append(data_syms[i * layout.data_block_len:(i + 1) * layout.data_block_len])
    frame = np.concatenate(parts)
    assert frame.size == layout.n_symbols
    return frame


def check_frame_info(info_bits):
    """Split decoded info bits into (payload_bits, crc_ok)."""
    info_bits = np.asarray(info_bits, dtype=np.uint8)
    payload = info_bits[:-FRAME_CRC_BITS]
    crc = info_bits[-FRAME_CRC_BITS:]
    return payload, bool(np.array_equal(payload_crc_bits(payload), crc))
