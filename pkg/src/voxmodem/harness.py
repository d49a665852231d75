"""In-process evaluation runs: loopback and BER-versus-SNR sweeps.

Everything here pushes random payloads through the full
build -> shape -> channel -> receive pipeline frame by frame, entirely
deterministic under the given seed.  Missed frames (no preamble
detection) are charged half their payload bits as errors, the
expectation of guessing.
"""

import csv
import io
from dataclasses import dataclass, replace
from multiprocessing import get_context

import numpy as np

from voxmodem import channel as channel_sim
from voxmodem import modem
from voxmodem.config import CONVOLUTIONAL, TURBO_PRECODED, require_valid
from voxmodem.framing import FrameLayout
from voxmodem.prng import derive_seed

SWEEP_CSV_HEADER = ("snr_db", "code", "ber", "mean_iters", "n_bits")
LOOPBACK_CSV_HEADER = (
    "q", "code_rate", "symbol_rate", "code", "snr_db", "n_bits",
    "ber", "drop_rate", "goodput_bps", "mean_iters",
)


@dataclass
class LoopbackReport:
    config: object
    profile: object
    n_bits: int
    bit_errors: int
    frames_sent: int
    frames_detected: int
    frames_ok: int
    frames_dropped: int
    frames_missed: int
    mean_iters: float
    goodput_bps: float
    iteration_ber: dict  # iteration index -> (errors, bits) over coded frames

    @property
    def ber(self):
        return self.bit_errors / self.n_bits if self.n_bits else 0.0

    @property
    def drop_rate(self):
        attempts = self.frames_sent
        bad = self.frames_dropped + self.frames_missed
        return bad / attempts if attempts else 0.0

    def csv_row(self):
        cfg = self.config
        return (
            cfg.q, str(cfg.code_rate), cfg.symbol_rate, cfg.code_kind,
            _fmt_snr(self.profile.snr_db), self.n_bits,
            f"{self.ber:.3e}", f"{self.drop_rate:.4f}",
            f"{self.goodput_bps:.1f}", f"{self.mean_iters:.2f}",
        )


def _fmt_snr(snr_db):
    return "inf" if not np.isfinite(snr_db) else f"{snr_db:g}"


def run_loopback(config, profile, n_bits, seed=0, max_iters=8,
                 collect_iterations=False):
    """Push ~n_bits of random payload through tx -> channel -> rx."""
    require_valid(config)
    layout = FrameLayout.for_config(config)
    session_seed = derive_seed(seed, 0x5E55)
    mod = modem.Modulator(config, session_seed)
    demod = modem.Demodulator(
        sample_rate_hz=config.sample_rate_hz, carrier_hz=config.carrier_hz,
        rolloff=config.rolloff, session_seed=session_seed,
        rate_hint=config.symbol_rate, max_iters=max_iters,
        collect_iterations=collect_iterations,
    )
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB175]))
    n_frames = max(int(np.ceil(n_bits / layout.payload_len)), 1)
    chunk = mod.frame_samples

    payloads = []
    frames = []
    audio_time = 0.0
    for k in range(n_frames):
        payload = rng.integers(0, 2, layout.payload_len).astype(np.uint8)
        payloads.append(payload)
        audio = mod.frame_audio(payload)
        audio_time += len(audio) / config.sample_rate_hz
        rx_audio = channel_sim.apply_channel(
            audio, replace(profile, rng_seed=derive_seed(seed, 0xC4A7, k)),
            config.sample_rate_hz,
        )
        frames.extend(demod.feed(rx_audio))
    tail = mod.flush_audio()
    if len(tail):
        rx_tail = channel_sim.apply_channel(
            tail, replace(profile, rng_seed=derive_seed(seed, 0xC4A7, n_frames)),
            config.sample_rate_hz,
        )
        audio_time += len(tail) / config.sample_rate_hz
        frames.extend(demod.feed(rx_tail))
    frames.extend(demod.flush())

    bit_errors = 0
    ok = dropped = 0
    matched = set()
    iters = []
    iteration_ber = {}
    for frame in frames:
        k = min(int(round(frame.start_sample / chunk)), n_frames - 1)
        matched.add(k)
        truth = payloads[k]
        got = frame.payload_bits
        if frame.crc_ok and len(got) == len(truth):
            errs = int(np.sum(got != truth))
            ok += 1
        else:
            dropped += 1
            if len(got) == len(truth):
                errs = int(np.sum(got != truth))
            else:
                errs = len(truth) // 2
        bit_errors += errs
        iters.append(frame.iterations)
        for it, payload_bits, _, _ in frame.iteration_info:
            e, b = iteration_ber.get(it, (0, 0))
            if len(payload_bits) >= len(truth):
                e += int(np.sum(payload_bits[: len(truth)] != truth))
                b += len(truth)
            iteration_ber[it] = (e, b)

    missed = n_frames - len(matched)
    for k in range(n_frames):
        if k not in matched:
            bit_errors += len(payloads[k]) // 2

    total_bits = n_frames * layout.payload_len
    good_bits = ok * layout.payload_len
    goodput = good_bits / audio_time if audio_time > 0 else 0.0
    return LoopbackReport(
        config=config, profile=profile, n_bits=total_bits,
        bit_errors=bit_errors, frames_sent=n_frames,
        frames_detected=demod.frames_detected, frames_ok=ok,
        frames_dropped=dropped, frames_missed=missed,
        mean_iters=float(np.mean(iters)) if iters else 0.0,
        goodput_bps=goodput, iteration_ber=iteration_ber,
    )


def _sweep_point(args):
    config, kind, snr_db, n_bits, seed, max_iters, collect = args
    cfg = replace(config, code_kind=kind)
    profile = channel_sim.proakis_b_profile(
        cfg.symbol_rate, cfg.sample_rate_hz, snr_db=snr_db,
        carrier_hz=cfg.carrier_hz, rolloff=cfg.rolloff,
    )
    point_seed = derive_seed(seed, int(round(snr_db * 8)),
                             0 if kind == CONVOLUTIONAL else 1)
    report = run_loopback(cfg, profile, n_bits, seed=point_seed,
                          max_iters=max_iters, collect_iterations=collect)
    return (snr_db, kind, report)


def ber_sweep(config, snr_grid, n_bits, code_kinds=(CONVOLUTIONAL, TURBO_PRECODED),
              seed=0, max_iters=8, workers=1, collect_iterations=False):
    """End-to-end Monte Carlo over an SNR grid on the ISI test channel.

    Returns (rows, reports): rows are the CSV tuples
    (snr_db, code, ber, mean_iters, n_bits) sorted by (code, snr), and
    reports maps (snr_db, code) to the full LoopbackReport.
    """
    jobs = [
        (config, kind, float(snr), n_bits, seed, max_iters, collect_iterations)
        for kind in code_kinds
        for snr in snr_grid
    ]
    if workers > 1:
        with get_context("fork").Pool(workers) as pool:
            results = pool.map(_sweep_point, jobs)
    else:
        results = [_sweep_point(job) for job in jobs]

    rows = []
    reports = {}
    for snr_db, kind, report in sorted(results, key=lambda r: (r[1], r[0])):
        reports[(snr_db, kind)] = report
        rows.append((
            f"{snr_db:g}", kind, f"{report.ber:.6e}",
            f"{report.mean_iters:.3f}", report.n_bits,
        ))
    return rows, reports


def sweep_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_CSV_HEADER)
    writer.writerows(rows)
    return buf.getvalue()


def loopback_csv(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LOOPBACK_CSV_HEADER)
    for report in reports:
        writer.writerow(report.csv_row())
    return buf.getvalue()
