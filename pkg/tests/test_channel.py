import numpy as np
import pytest
from scipy.signal import fftconvolve

from voxmodem import channel as ch


def _tone_mix(rng, n, fs=48000):
    t = np.arange(n) / fs
    x = np.zeros(n)
    for f in (800.0, 5200.0, 12000.0, 15500.0):
        x += np.cos(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    return 0.2 * x


def test_identity_profile_is_exact():
    rng = np.random.default_rng(0)
    x = rng.normal(0, 0.1, 50000)
    y = ch.apply_channel(x, ch.IDEAL_PROFILE)
    assert np.array_equal(x, y)


def test_determinism_same_seed():
    rng = np.random.default_rng(1)
    x = _tone_mix(rng, 100000)
    a = ch.apply_channel(x, ch.STRESSED_PROFILE)
    b = ch.apply_channel(x, ch.STRESSED_PROFILE)
    assert np.array_equal(a, b)


def test_linearity_without_noise():
    rng = np.random.default_rng(2)
    profile = ch.ChannelProfile(
        taps_schedule=((0, (1.0, 0.0, 0.3)),), passband_hz=(100.0, 20000.0)
    )
    x = rng.normal(0, 0.1, 20000)
    y1 = ch.apply_channel(2.5 * x, profile)
    y2 = 2.5 * ch.apply_channel(x, profile)
    assert np.max(np.abs(y1 - y2)) < 1e-9


def test_snr_calibration_within_tenth_db():
    # sample-statistics oracle: measure in-band powers with the same
    # bandpass the channel uses
    rng = np.random.default_rng(3)
    n = 10**6
    x = _tone_mix(rng, n)
    for snr_db in (10.0, 25.0):
        profile = ch.ChannelProfile(
            snr_db=snr_db, passband_hz=(100.0, 20000.0), rng_seed=7
        )
        clean = ch.apply_channel(x, ch.ChannelProfile(passband_hz=(100.0, 20000.0)))
        noisy = ch.apply_channel(x, profile)
        noise = noisy - clean
        bp = ch._bandpass_taps((100.0, 20000.0), 48000)
        noise_in = fftconvolve(noise, bp)[: n]
        measured = 10 * np.log10(np.mean(clean**2) / np.mean(noise_in**2))
        assert measured == pytest.approx(snr_db, abs=0.1)


def test_dropout_fraction():
    rng = np.random.default_rng(4)
    x = rng.normal(0, 0.1, 10 * 48000)
    profile = ch.ChannelProfile(dropout=(1.0, 50.0), rng_seed=3)
    y = ch.apply_channel(x, profile)
    zeroed = np.mean(y == 0.0)
    assert zeroed == pytest.approx(0.05, abs=0.02)
    # ground-truth intervals match what the channel zeroed
    for start, stop in ch.dropout_intervals(profile, len(x), 48000):
        assert not y[start:stop].any()


def test_time_varying_fir_interpolates():
    # schedule moving from identity to pure one-sample delay
    n = 1000
    profile = ch.ChannelProfile(
        taps_schedule=((0, (1.0, 0.0)), (n, (0.0, 1.0)))
    )
    x = np.zeros(n)
    x[::100] = 1.0
    y = ch.apply_channel(x, profile)
    # at t=0 the impulse passes straight through; at t=900 it is mostly delayed
    assert y[0] == pytest.approx(1.0)
    assert y[900] == pytest.approx(0.1, abs=1e-9)
    assert y[901] == pytest.approx(0.9, abs=1e-9)


def test_out_of_band_rejection_of_bandpass():
    n = 48000
    t = np.arange(n) / 48000
    tone = np.cos(2 * np.pi * 23000.0 * t)
    profile = ch.ChannelProfile(passband_hz=(100.0, 20000.0))
    y = ch.apply_channel(tone, profile)
    assert np.mean(y[1000:-1000] ** 2) < 1e-6 * np.mean(tone**2)


def test_profile_validation():
    bad = ch.ChannelProfile(passband_hz=(5000.0, 1000.0))
    assert ch.apply_channel.__name__  # silence lint
    with pytest.raises(ValueError):
        ch.apply_channel(np.zeros(10), bad)


def test_profile_file_roundtrip(tmp_path):
    path = tmp_path / "chan.profile"
    ch.profile_to_file(ch.STRESSED_PROFILE, path)
    back = ch.profile_from_file(path)
    assert back.snr_db == ch.STRESSED_PROFILE.snr_db
    assert back.dropout == ch.STRESSED_PROFILE.dropout
    assert back.passband_hz == ch.STRESSED_PROFILE.passband_hz
    a = np.array(back.taps_schedule[0][1])
    b = np.array(ch.STRESSED_PROFILE.taps_schedule[0][1])
    assert np.array_equal(a, b)


def test_proakis_b_profile_realizes_discrete_taps():
    # after matched filtering and symbol sampling the audio-domain
    # symbol-spaced FIR must reproduce the classic [0.407 0.815 0.407]
    from voxmodem.coding import qam_map
    from voxmodem.framing import preamble_symbols
    from voxmodem import equalizer as eq
    from voxmodem.waveform import (
        downconvert, reference_preamble, sample_symbols, shape, srrc_taps,
        synchronize,
    )

    rng = np.random.default_rng(5)
    sps = 20  # 2400 sym/s: one symbol = 5 full carrier cycles
    pulse = srrc_taps(0.2, sps)
    profile = ch.proakis_b_profile(2400, snr_db=float("inf"))
    syms = np.concatenate([
        preamble_symbols(),
        qam_map(rng.integers(0, 2, 2 * 200).astype(np.uint8), 2),
    ])
    from voxmodem.waveform import upconvert

    audio, scale = upconvert(shape(syms, pulse), 12000.0, 48000)
    rx = ch.apply_channel(audio, profile)
    bb = downconvert(rx, 12000.0, 48000, pulse) / scale
    ref = reference_preamble(preamble_symbols(), pulse)
    offset, *_ = synchronize(bb, ref)
    r = sample_symbols(bb, 0, 0.0, 1.0, sps, len(syms),
                       first_symbol_at=2 * pulse.delay)
    want_taps = np.array([0.407, 0.815, 0.407])
    want_taps = want_taps / np.linalg.norm(np.r_[want_taps, np.zeros(0)])
    h, nv = eq.estimate_channel(r[63:], syms[63:], k_f=0, k_p=4)
    assert np.abs(h[0] - want_taps[0]) < 5e-3
    assert np.abs(h[1] - want_taps[1]) < 5e-3
    assert np.abs(h[2] - want_taps[2]) < 5e-3
    assert np.abs(h[3]) < 5e-3 and np.abs(h[4]) < 5e-3
