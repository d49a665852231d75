"""Full modem pipeline: payload bytes to audio samples and back.

The transmitter emits per-frame audio chunks; a chunk is the pulse
response of the frame's symbols, which leaves exactly one filter span
of ring-out after the last symbol, so concatenated chunks equal a
continuous stream with a span-length inter-frame gap.  Carrier phase
restarts at every frame; the receiver re-acquires phase from the
preamble anyway.

The receiver is a streaming state machine: it buffers audio, hunts for
a preamble correlation peak at each candidate symbol rate (frames
announce Q and coding in the signal field, but the symbol rate must be
hypothesis-tested because it sets the sampling grid), then

    preamble LS channel estimate -> equalize + parse the signal field
    -> per-training-block LS estimates -> turbo equalization loop
    -> payload CRC verdict.

A frame whose signal field fails its CRC, or whose payload CRC fails
after max_iters, is counted as dropped; the fixed frame geometry still
tells the receiver how far to skip.
"""

from dataclasses import dataclass, field

import numpy as np

from voxmodem import coding, equalizer, framing, waveform
from voxmodem.config import SYMBOL_RATES, require_valid
from voxmodem.errors import NoFrameDetected

DEFAULT_SESSION_SEED = 0x5EED
# ring-out kept after each frame's last symbol; the pulse tail beyond
# this is ~-60 dB, so trimming it leaves frames (n_symbols + GAP) apart
GAP_SYMBOLS = 16


def _frame_known_values(layout, session_seed, n_grid):
    """Grid of known symbol values (preamble, signal treated later, training)."""
    known = np.zeros(n_grid, dtype=np.complex128)
    known[: layout.preamble_len] = framing.preamble_symbols()
    for i, (start, stop) in enumerate(layout.training_block_slices()):
        known[start:stop] = framing.training_symbols(
            session_seed, i, layout.training_block_len
        )
    return known


class Modulator:
    """Builds frames from payload bits and shapes them into audio chunks.

    Streaming works by overlap-add: each frame emits exactly
    (n_symbols + GAP_SYMBOLS) * sps samples and carries its remaining
    pulse ring-out into the next chunk (or into flush_audio), so the
    concatenated chunks equal one continuously filtered stream with a
    GAP_SYMBOLS silence between frames.  The carrier phase continues
    across chunks.
    """

    def __init__(self, config, session_seed=DEFAULT_SESSION_SEED, layout=None):
        require_valid(config)
        self.config = config
        self.session_seed = session_seed
        self.layout = layout or framing.FrameLayout.for_config(config)
        self.pulse = waveform.srrc_taps(config.rolloff, config.sps)
        self._carry = np.zeros(0, dtype=np.complex128)
        self._position = 0  # oscillator sample counter

    @property
    def frame_samples(self):
        return self.config.sps * (self.layout.n_symbols + GAP_SYMBOLS)

    def _emit(self, baseband):
        audio, _ = waveform.upconvert(
            baseband, self.config.carrier_hz, self.config.sample_rate_hz,
            start_sample=self._position,
        )
        self._position += len(audio)
        return audio

    def frame_audio(self, payload_bits):
        """Audio chunk for one frame carrying the given payload bits."""
        symbols = framing.build_frame(
            payload_bits, self.config, self.layout, self.session_seed
        )
        baseband = waveform.shape(symbols, self.pulse)
        cut = self.frame_samples
        chunk = baseband[:cut].copy()
        chunk[: len(self._carry)] += self._carry
        self._carry = baseband[cut:].copy()
        return self._emit(chunk)

    def flush_audio(self):
        """Remaining ring-out after the last frame."""
        tail, self._carry = self._carry, np.zeros(0, dtype=np.complex128)
        if not len(tail):
            return np.zeros(0)
        return self._emit(tail)

    def modulate_bits(self, bits):
        """All frames for a bit stream, concatenated. Returns (audio, n_frames)."""
        bits = np.asarray(bits, dtype=np.uint8)
        per_frame = self.layout.payload_len
        chunks = []
        n_frames = 0
        for start in range(0, len(bits), per_frame):
            chunks.append(self.frame_audio(bits[start:start + per_frame]))
            n_frames += 1
        if not chunks:
            return np.zeros(0), 0
        chunks.append(self.flush_audio())
        return np.concatenate(chunks), n_frames

    def modulate_bytes(self, data):
        return self.modulate_bits(coding.bits_from_bytes(data))


@dataclass
class RxFrame:
    """One detected frame and everything the receiver learned from it."""

    payload_bits: np.ndarray
    crc_ok: bool
    signal_field: object
    snr_db: float
    iterations: int
    soft_margin: float
    symbol_rate: int
    start_sample: int
    signal_ok: bool = True
    iteration_info: list = field(default_factory=list)


class Demodulator:
    """Streaming receiver; feed() audio chunks, collect RxFrames.

    rate_hint orders the symbol-rate hypothesis search; candidates
    stay enabled so rate switches announced in later frames still
    demodulate.  max_iters bounds the turbo loop per frame.
    """

    def __init__(self, sample_rate_hz=48000, carrier_hz=12000.0, rolloff=0.2,
                 session_seed=DEFAULT_SESSION_SEED, layout_kwargs=None,
                 rate_hint=None, max_iters=8, k_f=equalizer.DEFAULT_K_F,
                 k_p=equalizer.DEFAULT_K_P, collect_iterations=False):
        self.sample_rate_hz = sample_rate_hz
        self.carrier_hz = carrier_hz
        self.rolloff = rolloff
        self.session_seed = session_seed
        self.layout_kwargs = layout_kwargs or {}
        self.max_iters = max_iters
        self.k_f = k_f
        self.k_p = k_p
        self.collect_iterations = collect_iterations

        self._layout_base = framing.FrameLayout(**self.layout_kwargs)
        self._rates = [
            r for r in SYMBOL_RATES if sample_rate_hz % r == 0
        ]
        if rate_hint in self._rates:
            self._rates.remove(rate_hint)
            self._rates.insert(0, rate_hint)
        self._per_rate = {}
        for rate in self._rates:
            sps = sample_rate_hz // rate
            pulse = waveform.srrc_taps(rolloff, sps)
            ref = waveform.reference_preamble(framing.preamble_symbols(), pulse)
            self._per_rate[rate] = (pulse, ref)

        self._buffer = np.zeros(0)
        self._consumed = 0  # absolute sample index of buffer[0]
        self._next_scan_len = 0  # skip rescans until the buffer grows past this
        self.frames_detected = 0
        self.frames_ok = 0
        self.frames_dropped = 0

    # -- geometry helpers ---------------------------------------------------

    def _frame_span(self, rate):
        sps = self.sample_rate_hz // rate
        return sps * (self._layout_base.n_symbols + GAP_SYMBOLS)

    def _max_frame_span(self):
        return max(self._frame_span(rate) for rate in self._rates)

    # -- feeding ------------------------------------------------------------

    def feed(self, samples):
        """Append audio, demodulate every complete frame found."""
        samples = np.asarray(samples, dtype=np.float64)
        if samples.size:
            self._buffer = np.concatenate([self._buffer, samples])
        out = []
        while True:
            frame = self._try_demodulate(final=False)
            if frame is None:
                break
            out.append(frame)
        self._trim()
        return out

    def flush(self):
        """Demodulate whatever remains (end of stream)."""
        out = []
        while True:
            frame = self._try_demodulate(final=True)
            if frame is None:
                break
            out.append(frame)
        return out

    def _trim(self):
        # dead air between frames must not grow the buffer without bound
        keep = 2 * self._max_frame_span()
        if len(self._buffer) > 3 * keep:
            cut = len(self._buffer) - keep
            self._buffer = self._buffer[cut:]
            self._consumed += cut
            self._next_scan_len = 0

    def _discard(self, n):
        self._consumed += n
        self._buffer = self._buffer[n:]

    # -- detection ----------------------------------------------------------

    def _scan_rate(self, rate, scan_len):
        """Try to sync at one symbol-rate hypothesis in buffer[:scan_len]."""
        pulse, ref = self._per_rate[rate]
        if scan_len < len(ref):
            return None
        sps = self.sample_rate_hz // rate
        bb = waveform.downconvert(
            self._buffer[:scan_len], self.carrier_hz, self.sample_rate_hz, pulse
        )
        try:
            offset, phase, amp, metric = waveform.synchronize(
                bb, ref, first=True, first_window=4 * sps
            )
        except NoFrameDetected:
            return None
        return (rate, offset, bb, pulse, phase, amp)

    def _scan_window(self, final):
        """Look for the earliest preamble among the rate hypotheses.

        Frames usually start right at the head of the buffer (back to
        back transmission), so cheap narrow windows are scanned at every
        rate first; a full-slice scan only runs when those all miss.
        The earliest offset wins so a later frame at one rate cannot
        mask an earlier frame at another.
        """
        max_window = min(len(self._buffer), 2 * self._max_frame_span())
        hits = []
        for rate in self._rates:
            _, ref = self._per_rate[rate]
            sps = self.sample_rate_hz // rate
            narrow = min(len(self._buffer), len(ref) + 64 * sps)
            hit = self._scan_rate(rate, narrow)
            if hit is not None:
                hits.append(hit)
        if not hits:
            for rate in self._rates:
                _, ref = self._per_rate[rate]
                window = min(
                    len(self._buffer), self._frame_span(rate) + 2 * len(ref)
                )
                hit = self._scan_rate(rate, window)
                if hit is not None:
                    hits.append(hit)
        if not hits:
            return None, max_window
        return min(hits, key=lambda h: h[1]), max_window

    def _try_demodulate(self, final):
        while True:
            if not final and len(self._buffer) < self._next_scan_len:
                return None
            hit, max_window = self._scan_window(final)
            if hit is None:
                if len(self._buffer) > max_window:
                    # no preamble in this slice; slide, keeping an overlap
                    self._discard(max(max_window - self._max_frame_span(), 1))
                    continue
                self._next_scan_len = len(self._buffer) + self._max_frame_span() // 4
                return None

            rate, offset, bb, pulse, phase, amp = hit
            sps = self.sample_rate_hz // rate
            grid_end = offset + 2 * pulse.delay + self._layout_base.n_symbols * sps
            if grid_end > len(self._buffer) and not final:
                # frame not fully buffered yet
                self._next_scan_len = grid_end
                return None
            if grid_end + pulse.delay > len(bb):
                stop = min(grid_end + 2 * pulse.delay, len(self._buffer))
                bb = waveform.downconvert(
                    self._buffer[:stop], self.carrier_hz,
                    self.sample_rate_hz, pulse,
                )

            frame = self._demodulate_at(rate, bb, pulse, offset, phase, amp)
            if rate in self._rates and self._rates[0] != rate:
                self._rates.remove(rate)
                self._rates.insert(0, rate)
            advance = min(
                offset + (self._layout_base.n_symbols + GAP_SYMBOLS) * sps,
                len(self._buffer),
            )
            self._discard(advance)
            self._next_scan_len = 0
            return frame

    def _demodulate_at(self, rate, bb, pulse, offset, phase, amp):
        layout = self._layout_base
        sps = self.sample_rate_hz // rate
        start_sample = self._consumed + offset
        self.frames_detected += 1
        try:
            phase, amp = waveform.refine_gain(
                bb, offset, pulse, framing.preamble_symbols(), sps
            )
        except (ValueError, waveform.TruncatedFrame):
            pass  # keep the correlation-peak estimate

        # pad so the guard windows past the last symbol exist
        guard = 4 * (self.k_f + self.k_p + 1) * sps
        need = offset + 2 * pulse.delay + layout.n_symbols * sps + guard
        if need > len(bb):
            bb = np.concatenate([bb, np.zeros(need - len(bb), dtype=bb.dtype)])
        grid = waveform.sample_symbols(
            bb, offset, phase, amp, sps,
            layout.n_symbols + 4 * (self.k_f + self.k_p + 1),
            first_symbol_at=2 * pulse.delay,
        )

        known = _frame_known_values(layout, self.session_seed, len(grid))

        # bootstrap: channel from the preamble, then read the signal field
        try:
            pre_est = equalizer.estimate_frame_channel(
                grid, [(0, layout.preamble_len)], [framing.preamble_symbols()],
                self.k_f, self.k_p,
            )
        except ValueError:
            self.frames_dropped += 1
            return RxFrame(np.zeros(0, np.uint8), False, None, 0.0, 0, 0.0,
                           rate, start_sample, signal_ok=False)
        sig_idx = np.arange(layout.preamble_len, layout.header_len)
        sig_z, _ = equalizer.mmse_symbol_estimates(
            grid[: layout.header_len + 4 * pre_est.n_taps],
            pre_est,
            np.zeros(2 * len(sig_idx)),
            2,
            data_index=sig_idx,
            known_values=known[: layout.header_len + 4 * pre_est.n_taps],
        )
        sig = framing.parse_signal_field(sig_z)
        if sig is None or sig.symbol_rate != rate:
            self.frames_dropped += 1
            return RxFrame(np.zeros(0, np.uint8), False, None,
                           pre_est.snr_db(), 0, 0.0, rate, start_sample,
                           signal_ok=False)

        # frame-wide channel estimate from the training blocks
        slices = layout.training_block_slices()
        train_vals = [
            framing.training_symbols(self.session_seed, i, layout.training_block_len)
            for i in range(layout.n_training_sets)
        ]
        try:
            est = equalizer.estimate_frame_channel(
                grid, slices, train_vals, self.k_f, self.k_p
            )
        except ValueError:
            self.frames_dropped += 1
            return RxFrame(np.zeros(0, np.uint8), False, sig, pre_est.snr_db(),
                           0, 0.0, rate, start_sample)

        spec = coding.CodeSpec(
            kind=sig.code_kind,
            code_rate=sig.code_rate,
            interleaver_seed=framing.interleaver_seed(self.session_seed),
        )
        _, data_idx = layout.training_positions()
        n_info = coding.max_info_bits(layout.bit_capacity(sig.q), spec)

        def crc_check(info_bits):
            _, ok = framing.check_frame_info(info_bits)
            return ok

        iteration_info = [] if self.collect_iterations else None
        collect = None
        if iteration_info is not None:
            def collect(it, info_bits, margin):
                payload, ok = framing.check_frame_info(info_bits)
                iteration_info.append((it, payload.copy(), ok, margin))

        info_bits, iters, margin = equalizer.turbo_receive(
            grid, est, spec, self.max_iters, q=sig.q, n_info=n_info,
            data_index=data_idx, known_values=known, crc_check=crc_check,
            collect=collect,
        )
        payload_full, ok = framing.check_frame_info(info_bits)
        payload = payload_full[: sig.payload_len]
        if sig.payload_len > layout.payload_len_for(sig.q, spec):
            ok = False
        if ok:
            self.frames_ok += 1
        else:
            self.frames_dropped += 1
        return RxFrame(payload, ok, sig, est.snr_db(), iters, margin, rate,
                       start_sample, iteration_info=iteration_info or [])


def demodulate_audio(samples, **kwargs):
    """Batch demodulation; returns the list of RxFrames."""
    demod = Demodulator(**kwargs)
    frames = demod.feed(samples)
    frames.extend(demod.flush())
    return frames, demod


def modulate_bytes(data, config, session_seed=DEFAULT_SESSION_SEED):
    """Batch modulation of a byte string. Returns (audio, n_frames)."""
    return Modulator(config, session_seed).modulate_bytes(data)


def recover_bytes(frames):
    """Concatenate payload bits of in-order frames and pack to bytes.

    Returns (data, ok): ok is False when any frame was dropped or the
    total bit count is not byte-aligned.
    """
    ok = all(f.crc_ok for f in frames) and bool(frames)
    bits = [f.payload_bits for f in frames if f.crc_ok]
    if not bits:
        return b"", ok and False
    allbits = np.concatenate(bits)
    usable = 8 * (len(allbits) // 8)
    if usable != len(allbits):
        ok = False
    return coding.bytes_from_bits(allbits[:usable]), ok
