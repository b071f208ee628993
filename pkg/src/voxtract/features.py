"""Spectral representations and the mean-absolute-error objective.

Four fixed representations are available for the matching loss: a 1024-sample
Hann STFT at 50% overlap, a multiscale bank of STFTs (windows 64..1024 at 75%
overlap), a 128-band mel spectrogram limited to 8 kHz, and 20 MFCCs taken from
the log mel bands. Magnitudes stay linear except inside the MFCC, which is
logarithmic by definition. All transforms are pure functions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft

from .audio_io import AudioClip

STFT_WINDOW = 1024
STFT_HOP = 512
MULTISCALE_WINDOWS = (64, 128, 256, 512, 1024)  # hop = window / 4
MEL_FILTERS = 128
MEL_FMAX_HZ = 8000.0
MFCC_COEFFS = 20
LOG_FLOOR = 1e-10


class ReprKind(enum.Enum):
    STFT = "stft"
    MULTISCALE = "multiscale"
    MEL = "mel"
    MFCC = "mfcc"

    @classmethod
    def from_string(cls, name: str) -> "ReprKind":
        try:
            return cls(name.lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown representation {name!r}; expected one of {valid}")


@dataclass(frozen=True)
class FeatureMatrix:
    """frames x bins feature values plus the representation that produced them."""

    values: np.ndarray
    kind: ReprKind


def frame_count(n_samples: int, window: int, hop: int) -> int:
    """Number of full analysis frames; trailing partial frames are dropped."""
    if n_samples < window:
        raise ValueError(f"clip of {n_samples} samples is shorter than one "
                         f"{window}-sample window")
    return (n_samples - window) // hop + 1


@lru_cache(maxsize=None)
def _hann(window: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(window) / window)


def _magnitudes(samples: np.ndarray, window: int, hop: int) -> np.ndarray:
    n_frames = frame_count(len(samples), window, hop)
    frames = np.lib.stride_tricks.sliding_window_view(samples, window)[::hop]
    frames = frames[:n_frames] * _hann(window)
    return np.abs(np.fft.rfft(frames, axis=1))


def stft_mag(clip: AudioClip) -> FeatureMatrix:
    """Hann-windowed magnitude spectrogram, window 1024, hop 512 (513 bins)."""
    return FeatureMatrix(_magnitudes(clip.samples, STFT_WINDOW, STFT_HOP),
                         ReprKind.STFT)


def multiscale_mag(clip: AudioClip) -> list[FeatureMatrix]:
    """Magnitude spectrograms at windows 64..1024, each with 75% overlap."""
    if len(clip.samples) < max(MULTISCALE_WINDOWS):
        raise ValueError(f"clip of {len(clip.samples)} samples is shorter than "
                         f"one {max(MULTISCALE_WINDOWS)}-sample window")
    return [
        FeatureMatrix(_magnitudes(clip.samples, w, w // 4), ReprKind.MULTISCALE)
        for w in MULTISCALE_WINDOWS
    ]


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


@lru_cache(maxsize=None)
def mel_filterbank(n_fft_bins: int = STFT_WINDOW // 2 + 1,
                   sample_rate_hz: int = 48000) -> np.ndarray:
    """Triangular filters on the mel scale, shape (bins, MEL_FILTERS).

    Centers are equally spaced in mel between 0 Hz and 8 kHz; each filter's
    support lies strictly inside [0, 8 kHz].
    """
    edges_hz = _mel_to_hz(np.linspace(_hz_to_mel(0.0), _hz_to_mel(MEL_FMAX_HZ),
                                      MEL_FILTERS + 2))
    bin_hz = np.arange(n_fft_bins) * (sample_rate_hz / ((n_fft_bins - 1) * 2))
    fb = np.zeros((n_fft_bins, MEL_FILTERS))
    for m in range(MEL_FILTERS):
        left, center, right = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        rising = (bin_hz - left) / (center - left)
        falling = (right - bin_hz) / (right - center)
        fb[:, m] = np.maximum(0.0, np.minimum(rising, falling))
    return fb


def mel_spec(clip: AudioClip) -> FeatureMatrix:
    """128-band mel magnitude spectrogram built on the 1024-window STFT."""
    mags = _magnitudes(clip.samples, STFT_WINDOW, STFT_HOP)
    return FeatureMatrix(mags @ mel_filterbank(), ReprKind.MEL)


def mfcc(clip: AudioClip) -> FeatureMatrix:
    """First 20 coefficients of the orthonormal DCT-II of the log mel bands."""
    mel = mel_spec(clip).values
    log_mel = np.log(np.maximum(mel, LOG_FLOOR))
    coeffs = scipy.fft.dct(log_mel, type=2, norm="ortho", axis=1)[:, :MFCC_COEFFS]
    return FeatureMatrix(coeffs, ReprKind.MFCC)


def extract(kind: ReprKind, clip: AudioClip) -> np.ndarray:
    """Flattened feature vector for the requested representation."""
    if kind is ReprKind.STFT:
        return stft_mag(clip).values.ravel()
    if kind is ReprKind.MULTISCALE:
        return np.concatenate([m.values.ravel() for m in multiscale_mag(clip)])
    if kind is ReprKind.MEL:
        return mel_spec(clip).values.ravel()
    if kind is ReprKind.MFCC:
        return mfcc(clip).values.ravel()
    raise ValueError(f"unknown representation kind {kind!r}")


def mae(a: np.ndarray, b: np.ndarray) -> float:
    """Mean absolute error between two equal-length feature vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty feature vectors")
    return float(np.mean(np.abs(a - b)))
