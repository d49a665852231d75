"""WAV and raw PCM audio I/O.

Wire format everywhere: mono, 16-bit signed little-endian PCM,
default 48000 Hz.  Raw streams are the same samples headerless, for
piping between processes.
"""

import wave

import numpy as np

PCM_DTYPE = "<i2"
FULL_SCALE = 32767.0


def float_to_pcm(samples):
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    return (np.round(clipped * FULL_SCALE)).astype(PCM_DTYPE)


def pcm_to_float(pcm):
    return np.frombuffer(bytes(pcm), dtype=PCM_DTYPE).astype(np.float64) / FULL_SCALE


def write_wav(path, samples, sample_rate_hz=48000):
    pcm = float_to_pcm(samples)
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(sample_rate_hz)
        wav.writeframes(pcm.tobytes())


def read_wav(path):
    """Returns (samples as float64 in [-1, 1], sample_rate_hz)."""
    with wave.open(str(path), "rb") as wav:
        if wav.getnchannels() != 1 or wav.getsampwidth() != 2:
            raise ValueError(f"{path}: expected mono 16-bit PCM")
        rate = wav.getframerate()
        data = wav.readframes(wav.getnframes())
    return pcm_to_float(data), rate


def write_pcm(stream, samples):
    stream.write(float_to_pcm(samples).tobytes())


def read_pcm_chunk(stream, n_samples):
    """Read up to n_samples from a raw PCM byte stream (may return fewer)."""
    data = stream.read(n_samples * 2)
    if not data:
        return None
    if len(data) % 2:
        data = data[:-1]
    return pcm_to_float(data)
