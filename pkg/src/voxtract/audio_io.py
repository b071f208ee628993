"""Audio container, RIFF/WAVE file I/O, and controlled noise injection.

The pipeline works on mono 48 kHz buffers. Files at other rates or channel
layouts are rejected rather than silently converted, so feature values never
depend on a resampler choice.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

PIPELINE_RATE = 48000

_FORMAT_PCM = 1
_FORMAT_IEEE_FLOAT = 3


class WavError(ValueError):
    """A WAV file violated the pipeline's input contract."""


class ChannelCountError(WavError):
    pass


class SampleRateError(WavError):
    pass


class EncodingError(WavError):
    pass


@dataclass(frozen=True)
class WavSpec:
    """Format triple parsed from a WAV header."""

    sample_rate_hz: int
    channels: int
    encoding: str  # "pcm16" or "float32"


@dataclass(frozen=True)
class AudioClip:
    """Mono sample buffer with its sample rate; samples must be finite."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {samples.shape}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def _parse_wav(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            payload = body
        pos += 8 + chunk_size + (chunk_size & 1)
    if fmt is None or payload is None:
        raise WavError(f"{path}: missing fmt or data chunk")
    return fmt, payload


def probe_wav(path) -> WavSpec:
    """Parse just the format header, without the pipeline's validation."""
    fmt, _ = _parse_wav(path)
    audio_format, channels, rate, _byte_rate, _align, bits = fmt
    if audio_format == _FORMAT_PCM and bits == 16:
        encoding = "pcm16"
    elif audio_format == _FORMAT_IEEE_FLOAT and bits == 32:
        encoding = "float32"
    else:
        encoding = f"format{audio_format}/{bits}bit"
    return WavSpec(sample_rate_hz=rate, channels=channels, encoding=encoding)


def read_wav(path) -> AudioClip:
    """Read a mono 48 kHz PCM16 or IEEE float32 WAV file.

    PCM16 samples decode as value / 32768 so the full range maps into
    [-1, 1). Raises a distinct error per violated property (channel count,
    sample rate, encoding).
    """
    fmt, payload = _parse_wav(path)
    audio_format, channels, rate, _byte_rate, _align, bits = fmt
    if channels != 1:
        raise ChannelCountError(f"{path}: expected mono, got {channels} channels")
    if rate != PIPELINE_RATE:
        raise SampleRateError(
            f"{path}: expected {PIPELINE_RATE} Hz, got {rate} Hz"
        )
    if audio_format == _FORMAT_PCM and bits == 16:
        samples = np.frombuffer(payload, dtype="<i2").astype(float) / 32768.0
    elif audio_format == _FORMAT_IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(payload, dtype="<f4").astype(float)
    else:
        raise EncodingError(
            f"{path}: unsupported encoding (format {audio_format}, {bits}-bit); "
            "expected PCM16 or Float32"
        )
    return AudioClip(samples, rate)


def write_wav(path, clip: AudioClip, encoding: str = "float32") -> int:
    """Write `clip` with the requested encoding ('pcm16' or 'float32').

    Returns the number of samples that fell outside [-1, 1] and were clipped
    (always 0 for float32, which is written verbatim).
    """
    encoding = encoding.lower()
    if encoding == "pcm16":
        fmt_code, bits = _FORMAT_PCM, 16
        clipped = int(np.count_nonzero(np.abs(clip.samples) > 1.0))
        ints = np.clip(np.round(clip.samples * 32768.0), -32768, 32767)
        payload = ints.astype("<i2").tobytes()
    elif encoding == "float32":
        fmt_code, bits = _FORMAT_IEEE_FLOAT, 32
        clipped = 0
        payload = clip.samples.astype("<f4").tobytes()
    else:
        raise ValueError(f"unknown encoding {encoding!r}; use 'pcm16' or 'float32'")

    byte_rate = clip.sample_rate_hz * bits // 8
    header = b"".join([
        b"RIFF",
        struct.pack("<I", 36 + len(payload)),
        b"WAVE",
        b"fmt ",
        struct.pack("<IHHIIHH", 16, fmt_code, 1, clip.sample_rate_hz,
                    byte_rate, bits // 8, bits),
        b"data",
        struct.pack("<I", len(payload)),
    ])
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"failed writing WAV to {path}: {exc}") from exc
    return clipped


def add_noise_snr(clip: AudioClip, snr_db: float, seed: int) -> AudioClip:
    """Add Gaussian white noise at the requested signal-to-noise ratio.

    Noise power is signal_power / 10**(snr_db/10) with signal power measured
    over the whole clip. Deterministic in `seed`.
    """
    signal_power = float(np.mean(clip.samples ** 2))
    if signal_power == 0.0:
        raise ValueError("cannot set an SNR against a silent clip")
    noise_power = signal_power / 10.0 ** (snr_db / 10.0)
    rng = np.random.Generator(np.random.Philox(seed=np.random.SeedSequence(seed)))
    noise = rng.standard_normal(len(clip.samples)) * np.sqrt(noise_power)
    return AudioClip(clip.samples + noise, clip.sample_rate_hz)
