"""Objective intelligibility scoring and import of external perceptual scores.

STOI is computed from the standard definition: both signals move to a 10 kHz
front end, frames that are silent in the reference are removed, short-time
one-third-octave band envelopes are compared by clipped, normalized
correlation, and the correlations are averaged. Perceptual metrics that need
licensed tooling (PESQ, PEAQ, ViSQOL) are only ever imported from CSV; none
of these scores are optimization objectives, they just annotate reports.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.signal

from .audio_io import AudioClip

METRICS = ("STOI", "PESQ", "PEAQ", "VISQOL")

_FS = 10000          # internal analysis rate
_FRAME = 256         # analysis frame and silence-removal frame
_HOP = 128
_NFFT = 512
_N_BANDS = 15
_BAND_START_HZ = 150.0
_SEGMENT_FRAMES = 30  # 384 ms at the analysis rate
_DYN_RANGE_DB = 40.0
_BETA_DB = -15.0      # lower bound on the signal-to-distortion ratio


@dataclass(frozen=True)
class QualityScore:
    metric: str
    value: float
    source: str           # "internal" or "imported"
    clip_id: str | None = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; expected one of {METRICS}")
        if self.metric == "STOI":
            if not 0.0 <= self.value <= 1.0:
                raise ValueError(f"STOI value {self.value} outside [0, 1]")
        elif not 1.0 <= self.value <= 5.0:
            raise ValueError(f"{self.metric} value {self.value} outside MOS range [1, 5]")


def _hann(n: int) -> np.ndarray:
    # Symmetric window with zero endpoints dropped, as in the reference STOI.
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(1, n + 1) / (n + 1))


def _frames(x: np.ndarray, window: np.ndarray) -> np.ndarray:
    n = (len(x) - _FRAME) // _HOP + 1
    idx = np.arange(_FRAME)[None, :] + _HOP * np.arange(n)[:, None]
    return x[idx] * window


def _remove_silent_frames(x: np.ndarray, y: np.ndarray):
    """Drop frames more than 40 dB below the loudest reference frame.

    Both signals are rebuilt by overlap-add of the surviving frames so they
    stay time-aligned.
    """
    w = _hann(_FRAME)
    xf = _frames(x, w)
    yf = _frames(y, w)
    energy_db = 20.0 * np.log10(np.linalg.norm(xf, axis=1) + 1e-300)
    keep = energy_db > energy_db.max() - _DYN_RANGE_DB
    xf, yf = xf[keep], yf[keep]
    n_out = (len(xf) - 1) * _HOP + _FRAME if len(xf) else 0
    x_out = np.zeros(n_out)
    y_out = np.zeros(n_out)
    for i in range(len(xf)):
        sl = slice(i * _HOP, i * _HOP + _FRAME)
        x_out[sl] += xf[i]
        y_out[sl] += yf[i]
    return x_out, y_out


def _third_octave_matrix() -> np.ndarray:
    """Band-assignment matrix (bands x fft bins) for 15 bands from 150 Hz."""
    bin_hz = np.arange(_NFFT // 2 + 1) * (_FS / _NFFT)
    centers = _BAND_START_HZ * 2.0 ** (np.arange(_N_BANDS) / 3.0)
    low = centers * 2.0 ** (-1.0 / 6.0)
    high = centers * 2.0 ** (1.0 / 6.0)
    mat = np.zeros((_N_BANDS, len(bin_hz)))
    for j in range(_N_BANDS):
        mat[j, (bin_hz >= low[j]) & (bin_hz < high[j])] = 1.0
    return mat


def _band_envelopes(x: np.ndarray, band_matrix: np.ndarray) -> np.ndarray:
    w = _hann(_FRAME)
    frames = _frames(x, w)
    power = np.abs(np.fft.rfft(frames, n=_NFFT, axis=1)) ** 2
    return np.sqrt(power @ band_matrix.T)  # (frames, bands)


def stoi(reference: AudioClip, degraded: AudioClip) -> QualityScore:
    """Short-time objective intelligibility of `degraded` against `reference`.

    Requires equal lengths and equal sample rates; the reference must not be
    all silent. The value is clamped to [0, 1].
    """
    if len(reference) != len(degraded):
        raise ValueError(
            f"length mismatch: {len(reference)} vs {len(degraded)} samples")
    if reference.sample_rate_hz != degraded.sample_rate_hz:
        raise ValueError(
            f"sample rate mismatch: {reference.sample_rate_hz} vs "
            f"{degraded.sample_rate_hz}")
    if not np.any(reference.samples):
        raise ValueError("reference clip is silent")

    fs = reference.sample_rate_hz
    if fs != _FS:
        g = np.gcd(_FS, fs)
        x = scipy.signal.resample_poly(reference.samples, _FS // g, fs // g)
        y = scipy.signal.resample_poly(degraded.samples, _FS // g, fs // g)
    else:
        x, y = reference.samples, degraded.samples

    x, y = _remove_silent_frames(x, y)
    if len(x) < (_SEGMENT_FRAMES - 1) * _HOP + _FRAME:
        raise ValueError("clip too short for STOI after silence removal")

    band_matrix = _third_octave_matrix()
    xb = _band_envelopes(x, band_matrix)
    yb = _band_envelopes(y, band_matrix)

    clip_gain = 10.0 ** (-_BETA_DB / 20.0)
    n_frames = xb.shape[0]
    correlations = []
    for m in range(_SEGMENT_FRAMES, n_frames + 1):
        xs = xb[m - _SEGMENT_FRAMES:m]  # (30, bands)
        ys = yb[m - _SEGMENT_FRAMES:m]
        alpha = (np.linalg.norm(xs, axis=0)
                 / (np.linalg.norm(ys, axis=0) + 1e-300))
        ys = np.minimum(ys * alpha, xs * (1.0 + clip_gain))
        xc = xs - xs.mean(axis=0)
        yc = ys - ys.mean(axis=0)
        denom = np.linalg.norm(xc, axis=0) * np.linalg.norm(yc, axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.where(denom > 0, np.einsum("ij,ij->j", xc, yc) / denom, 0.0)
        correlations.append(corr)

    value = float(np.clip(np.mean(correlations), 0.0, 1.0))
    return QualityScore(metric="STOI", value=value, source="internal")


def import_scores(path) -> list[QualityScore]:
    """Parse externally computed scores from a `metric,clip_id,value` CSV.

    Unknown metric names and out-of-range values are rejected. An empty file
    yields an empty list.
    """
    scores = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        expected = ["metric", "clip_id", "value"]
        if reader.fieldnames != expected:
            raise ValueError(
                f"{path}: expected header {','.join(expected)}, "
                f"got {','.join(reader.fieldnames)}")
        for row_number, row in enumerate(reader, start=2):
            metric = (row["metric"] or "").strip().upper()
            if metric not in METRICS:
                raise ValueError(
                    f"{path}:{row_number}: unknown metric {row['metric']!r}")
            try:
                value = float(row["value"])
            except (TypeError, ValueError):
                raise ValueError(
                    f"{path}:{row_number}: bad value {row['value']!r}")
            try:
                score = QualityScore(metric=metric, value=value,
                                     source="imported",
                                     clip_id=(row["clip_id"] or "").strip())
            except ValueError as exc:
                raise ValueError(f"{path}:{row_number}: {exc}") from exc
            scores.append(score)
    return scores
