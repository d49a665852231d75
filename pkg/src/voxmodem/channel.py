"""Simulated voice-path channel: time-varying FIR, band-limiting,
calibrated AWGN and bulk dropouts.

Stands in for the live VoIP audio leg.  The impairment chain is
FIR -> bandpass -> AWGN -> dropout, everything deterministic given the
profile's rng_seed.  SNR is defined in-band: the noise level is set so
that signal power and noise power measured inside the configured
passband have exactly the requested ratio (that is the quantity the
receiver experiences).
"""

import io
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import fftconvolve, firwin

BANDPASS_TAPS = 257


@dataclass(frozen=True)
class ChannelProfile:
    """Impairment description for one direction of the audio path.

    taps_schedule: [(time_in_samples, fir_taps)] keypoints; taps are
    linearly interpolated between keypoints and held beyond the ends.
    passband_hz: (low, high) or None for the full band.
    dropout: (events_per_second, duration_ms) or None.
    """

    taps_schedule: tuple = ((0, (1.0,)),)
    snr_db: float = float("inf")
    passband_hz: tuple = None
    dropout: tuple = None
    rng_seed: int = 0

    def validate(self, sample_rate_hz):
        problems = []
        if not self.taps_schedule:
            problems.append("empty taps schedule")
        lengths = {len(taps) for _, taps in self.taps_schedule}
        if len(lengths) > 1:
            problems.append("schedule taps must share one length")
        if self.passband_hz is not None:
            low, high = self.passband_hz
            if not (0 <= low < high <= sample_rate_hz / 2):
                problems.append(f"passband {self.passband_hz} outside (0, fs/2]")
        if self.dropout is not None:
            rate, duration = self.dropout
            if rate < 0 or duration <= 0:
                problems.append(f"bad dropout spec {self.dropout}")
        return problems


IDEAL_PROFILE = ChannelProfile()

# mild echo pair a couple of ms out, wideband, clean
SKYPE_LIKE_PROFILE = ChannelProfile(
    taps_schedule=(
        (0, (1.0,) + (0.0,) * 95 + (0.1,) + (0.0,) * 143 + (0.05,)),
    ),
    snr_db=30.0,
    passband_hz=(100.0, 20000.0),
)

# same path plus bulk audio loss, for drop-rate accounting
STRESSED_PROFILE = replace(
    SKYPE_LIKE_PROFILE, snr_db=25.0, dropout=(0.5, 60.0), rng_seed=1
)


def proakis_b_profile(symbol_rate, sample_rate_hz=48000, snr_db=10.0,
                      carrier_hz=12000.0, rolloff=0.2, rng_seed=0):
    """Classic three-tap ISI channel realized at symbol spacing.

    Audio-domain taps [0.407, 0.815, 0.407] spaced one symbol period
    apart give (after matched filtering and symbol sampling) the
    discrete channel 0.407 + 0.815 z^-1 + 0.407 z^-2 up to the carrier
    rotation absorbed by the equalizer.  The passband is matched to the
    occupied spectrum so the profile SNR is what the receiver sees.
    """
    sps = sample_rate_hz // symbol_rate
    taps = np.zeros(2 * sps + 1)
    taps[0], taps[sps], taps[2 * sps] = 0.407, 0.815, 0.407
    taps /= np.linalg.norm(taps)
    half = (1.0 + rolloff) * symbol_rate / 2.0
    return ChannelProfile(
        taps_schedule=((0, tuple(taps)),),
        snr_db=snr_db,
        passband_hz=(carrier_hz - half, carrier_hz + half),
        rng_seed=rng_seed,
    )


def _bandpass_taps(passband_hz, sample_rate_hz):
    low, high = passband_hz
    nyq = sample_rate_hz / 2.0
    if low <= 0 and high >= nyq:
        return None
    if low <= 0:
        return firwin(BANDPASS_TAPS, high, fs=sample_rate_hz)
    if high >= nyq:
        return firwin(BANDPASS_TAPS, low, fs=sample_rate_hz, pass_zero=False)
    return firwin(BANDPASS_TAPS, [low, high], fs=sample_rate_hz, pass_zero=False)


def _band_noise_fraction(bp_taps):
    """Fraction of white-noise power a filter lets through."""
    if bp_taps is None:
        return 1.0
    return float(np.sum(bp_taps**2))


def _apply_fir_schedule(audio, schedule):
    """Time-varying FIR via linear interpolation between keypoints.

    Within a segment the output is (1-a)*conv(A) + a*conv(B), which is
    exact because the filter is linear in its taps.
    """
    points = sorted((int(t), np.asarray(taps, dtype=float)) for t, taps in schedule)
    if len(points) == 1:
        return fftconvolve(audio, points[0][1])[: len(audio)]
    n = len(audio)
    out = np.zeros(n)
    convs = {}

    def conv_with(idx):
        if idx not in convs:
            convs[idx] = fftconvolve(audio, points[idx][1])[:n]
        return convs[idx]

    # before the first keypoint: hold
    first_t = points[0][0]
    if first_t > 0:
        out[:first_t] = conv_with(0)[:first_t]
    for i in range(len(points) - 1):
        t0, t1 = points[i][0], points[i + 1][0]
        lo, hi = max(t0, 0), min(t1, n)
        if hi <= lo:
            continue
        alpha = (np.arange(lo, hi) - t0) / max(t1 - t0, 1)
        out[lo:hi] = (1 - alpha) * conv_with(i)[lo:hi] + alpha * conv_with(i + 1)[lo:hi]
    last_t = points[-1][0]
    if last_t < n:
        out[last_t:] = conv_with(len(points) - 1)[last_t:]
    return out


def dropout_intervals(profile, n_samples, sample_rate_hz):
    """Deterministic dropout windows [(start, stop)] for a buffer.

    Exposed separately so harnesses can compute ground truth without
    re-running the channel.
    """
    if profile.dropout is None:
        return []
    rate, duration_ms = profile.dropout
    rng = np.random.default_rng(np.random.SeedSequence([profile.rng_seed, 0xD207]))
    duration = int(round(duration_ms * 1e-3 * sample_rate_hz))
    expected = rate * n_samples / sample_rate_hz
    count = rng.poisson(expected)
    starts = np.sort(rng.integers(0, max(n_samples - duration, 1), size=count))
    return [(int(s), int(min(s + duration, n_samples))) for s in starts]


def apply_channel(audio, profile, sample_rate_hz=48000):
    """Run one audio buffer through the impairment chain."""
    problems = profile.validate(sample_rate_hz)
    if problems:
        raise ValueError("; ".join(problems))
    audio = np.asarray(audio, dtype=np.float64)
    out = _apply_fir_schedule(audio, profile.taps_schedule)

    bp = _bandpass_taps(profile.passband_hz, sample_rate_hz) \
        if profile.passband_hz is not None else None
    if bp is not None:
        out = fftconvolve(out, bp)[: len(out)]

    if np.isfinite(profile.snr_db):
        # the signal is band-limited by this point, so its full power
        # is its in-band power
        p_signal = float(np.mean(out**2))
        if p_signal > 0:
            snr = 10.0 ** (profile.snr_db / 10.0)
            band_frac = _band_noise_fraction(bp)
            # white noise level such that its in-band share meets the SNR
            noise_var = p_signal / snr / band_frac
            rng = np.random.default_rng(
                np.random.SeedSequence([profile.rng_seed, 0xA3C1])
            )
            out = out + rng.normal(0.0, np.sqrt(noise_var), len(out))

    for start, stop in dropout_intervals(profile, len(out), sample_rate_hz):
        out[start:stop] = 0.0
    return out


def ber_sweep(config, snr_grid, n_bits, **kwargs):
    """End-to-end BER versus SNR Monte Carlo; see harness.ber_sweep."""
    from voxmodem.harness import ber_sweep as run

    return run(config, snr_grid, n_bits, **kwargs)


def profile_from_file(path):
    """Read a key=value profile file.

    Keys: snr_db, passband_hz (low,high), dropout (rate,duration_ms),
    rng_seed, taps_schedule as time:tap,tap,...;time:taps...
    """
    pairs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            pairs[key] = value
    kwargs = {}
    if "snr_db" in pairs:
        kwargs["snr_db"] = float(pairs["snr_db"])
    if "rng_seed" in pairs:
        kwargs["rng_seed"] = int(pairs["rng_seed"])
    if "passband_hz" in pairs:
        low, high = (float(v) for v in pairs["passband_hz"].split(","))
        kwargs["passband_hz"] = (low, high)
    if "dropout" in pairs:
        rate, dur = (float(v) for v in pairs["dropout"].split(","))
        kwargs["dropout"] = (rate, dur)
    if "taps_schedule" in pairs:
        schedule = []
        for part in pairs["taps_schedule"].split(";"):
            t, taps = part.split(":")
            schedule.append((int(t), tuple(float(v) for v in taps.split(","))))
        kwargs["taps_schedule"] = tuple(schedule)
    return ChannelProfile(**kwargs)


def profile_to_file(profile, path):
    buf = io.StringIO()
    if np.isfinite(profile.snr_db):
        buf.write(f"snr_db = {profile.snr_db}\n")
    buf.write(f"rng_seed = {profile.rng_seed}\n")
    if profile.passband_hz is not None:
        buf.write(f"passband_hz = {profile.passband_hz[0]},{profile.passband_hz[1]}\n")
    if profile.dropout is not None:
        buf.write(f"dropout = {profile.dropout[0]},{profile.dropout[1]}\n")
    parts = []
    for t, taps in profile.taps_schedule:
        parts.append(f"{t}:" + ",".join(repr(float(v)) for v in taps))
    buf.write("taps_schedule = " + ";".join(parts) + "\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
