"""Waveguide vocal tract synthesizer and its articulatory parameter mapping.

The tract is a chain of 44 cylindrical sections. Traveling waves scatter at
section junctions with reflection coefficients derived from neighboring
cross-sectional areas, with a +0.75 reflection at the glottal end and -0.85 at
the lips. The waveguide updates at twice the audio rate (two scattering passes
per output sample). The glottal source is an LF flow-derivative pulse train
mixed with low-passed aspiration noise; `voiceness` moves the source between
pure breath (0) and a fully periodic pressed voice (1).

Synthesis is deterministic: (parameters, seed, duration) fully determine the
output buffer, and independent synthesizer runs never share state, so callers
may evaluate many parameter sets in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _waveguide
from .audio_io import AudioClip
from .params import (
    LOWER_BOUNDS,
    PARAM_BOUNDS,
    UPPER_BOUNDS,
    ParamTrajectory,
    SynthConfig,
    TractParams,
)

N_SECTIONS = 44
BLADE_START = 10      # first section the tongue shape writes
LIP_START = 39        # one past the last tongue-shaped section
TIP_START = 32        # normalizes the tongue phase span (TIP_START - BLADE_START)
PHARYNX_SECTIONS = slice(7, 12)
LIP_SECTIONS = slice(N_SECTIONS - 2, N_SECTIONS)
CONSTRICTION_HALF_WIDTH = 4.0

GLOTTAL_REFLECTION = 0.75
LIP_REFLECTION = -0.85
JUNCTION_DAMPING = 0.999
INTERNAL_RATE_FACTOR = 2  # scattering passes per output sample

FADE_IN_S = 0.010

# Fixed output scaling, calibrated once against a sweep of the parameter box
# (worst observed raw peak 0.46 at high pitch, full voiceness, tight throat;
# mid-range peaks around 0.36 with this value). Chosen so no valid parameter
# set can exceed |1|. Never adapted per clip: loudness must stay a function of
# the parameters alone or it would leak into the matching losses.
OUTPUT_GAIN = 2.0


@dataclass(frozen=True)
class DiameterProfile:
    """Per-section tract diameters in cm; always 44 sections, never negative."""

    diameters_cm: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diameters_cm, dtype=float)
        if d.shape != (N_SECTIONS,):
            raise ValueError(f"expected {N_SECTIONS} sections, got shape {d.shape}")
        if np.any(d < 0.0):
            raise ValueError("diameters must be non-negative")
        object.__setattr__(self, "diameters_cm", d)


def _rest_profile() -> np.ndarray:
    d = np.empty(N_SECTIONS)
    d[:7] = np.linspace(0.6, 1.1, 7)
    d[PHARYNX_SECTIONS] = 1.1
    d[12:] = 1.5
    return d


_REST = _rest_profile()


def _map_batch(phys: np.ndarray) -> np.ndarray:
    """Vectorized parameter-to-diameter mapping for a (m, 8) batch of rows."""
    m = phys.shape[0]
    d = np.tile(_REST, (m, 1))

    # Tongue: raised-cosine hump written over the blade region. The cosine is
    # zeroed outside +-pi/2 so sections far from the tongue revert to 1.5.
    tongue_index = phys[:, 2:3]
    tongue_diam = phys[:, 3:4]
    blade = np.arange(BLADE_START, LIP_START, dtype=float)
    t = 1.1 * np.pi * (tongue_index - blade) / (TIP_START - BLADE_START)
    cos_t = np.where(np.abs(t) <= np.pi / 2.0, np.cos(t), 0.0)
    d_eff = 2.0 + (tongue_diam - 2.0) / 1.5
    d[:, BLADE_START:LIP_START] = 1.5 - (1.5 - d_eff) * cos_t

    # Constriction: raised-cosine dip of half-width 4 sections, floored at the
    # constriction diameter; it only ever narrows.
    constr_index = phys[:, 5:6]
    constr_diam = phys[:, 6:7]
    sections = np.arange(N_SECTIONS, dtype=float)
    dist = np.abs(sections - constr_index)
    w = np.where(
        dist < CONSTRICTION_HALF_WIDTH,
        0.5 * (1.0 + np.cos(np.pi * dist / CONSTRICTION_HALF_WIDTH)),
        0.0,
    )
    narrow = w > 0.0
    d = np.where(narrow & (d > constr_diam), d + (constr_diam - d) * w, d)

    d[:, LIP_SECTIONS] = phys[:, 4:5]
    d[:, PHARYNX_SECTIONS] *= phys[:, 7:8] / PARAM_BOUNDS["throat_diameter_cm"][1]
    return d


def map_params_to_diameters(p: TractParams) -> DiameterProfile:
    """Deterministic mapping from the eight controls to 44 section diameters."""
    return DiameterProfile(_map_batch(p.as_array()[None, :])[0])


def _noise_stream(seed: int, n: int) -> np.ndarray:
    """Counter-based white-noise stream; schedule-independent by construction."""
    gen = np.random.Generator(np.random.Philox(seed=np.random.SeedSequence(seed)))
    return gen.standard_normal(n)


def glottal_source(pitch_hz, voiceness, n_samples, seed=0,
                   sample_rate_hz=48000) -> np.ndarray:
    """Glottal source buffer on its own, without the tract filter."""
    lo, hi = PARAM_BOUNDS["pitch_hz"]
    if not lo <= pitch_hz <= hi:
        raise ValueError(f"pitch_hz={pitch_hz} outside [{lo}, {hi}]")
    if not 0.0 <= voiceness <= 1.0:
        raise ValueError(f"voiceness={voiceness} outside [0, 1]")
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    out = np.empty(n_samples)
    _waveguide.glottal_kernel(
        np.array([float(pitch_hz)]),
        np.array([float(voiceness)]),
        _noise_stream(seed, n_samples),
        n_samples,
        float(sample_rate_hz),
        out,
    )
    return out


def run_tract(diameters_cm, excitation, damping=JUNCTION_DAMPING) -> np.ndarray:
    """Drive the scattering chain with a fixed profile and arbitrary excitation.

    Analysis hook: feeding an impulse exposes the tract's resonances without
    the glottal source in the way. The profile may have any length >= 2.
    """
    diameters_cm = np.asarray(diameters_cm, dtype=float)
    excitation = np.asarray(excitation, dtype=float)
    if diameters_cm.ndim != 1 or diameters_cm.size < 2:
        raise ValueError("need a 1-D profile of at least 2 sections")
    out = np.empty(len(excitation))
    _waveguide.tract_kernel(
        diameters_cm[None, :],
        excitation,
        len(excitation),
        GLOTTAL_REFLECTION,
        LIP_REFLECTION,
        damping,
        out,
    )
    return out


def synthesize_trajectory(traj: ParamTrajectory, duration_s: float,
                          cfg: SynthConfig = SynthConfig()) -> AudioClip:
    """Render audio while linearly interpolating parameters between keyframes.

    Interpolation happens in normalized space and the tract shape updates once
    per control block. A single-keyframe trajectory is exactly static
    synthesis.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    n_samples = round(duration_s * cfg.sample_rate_hz)
    return _synthesize_samples(traj, n_samples, cfg)


def synthesize_static(p: TractParams, duration_s: float,
                      cfg: SynthConfig = SynthConfig()) -> AudioClip:
    """Render audio for one fixed parameter set."""
    return synthesize_trajectory(ParamTrajectory(((0.0, p),)), duration_s, cfg)


def _synthesize_samples(traj: ParamTrajectory, n_samples: int,
                        cfg: SynthConfig) -> AudioClip:
    if cfg.tract_sections != N_SECTIONS:
        raise ValueError(
            f"the articulatory mapping is defined for {N_SECTIONS} sections, "
            f"got tract_sections={cfg.tract_sections}"
        )
    sr = cfg.sample_rate_hz
    block = cfg.control_block_samples
    n_blocks = math.ceil(n_samples / block)
    block_times = np.arange(n_blocks) * (block / sr)
    x = traj.sample_normalized(block_times)
    phys = LOWER_BOUNDS + x * (UPPER_BOUNDS - LOWER_BOUNDS)
    diam = _map_batch(phys)

    source = np.empty(n_samples)
    _waveguide.glottal_kernel(
        np.ascontiguousarray(phys[:, 0]),
        np.ascontiguousarray(phys[:, 1]),
        _noise_stream(cfg.seed, n_samples),
        block,
        float(sr),
        source,
    )
    out = np.empty(n_samples)
    _waveguide.tract_kernel(
        diam, source, block,
        GLOTTAL_REFLECTION, LIP_REFLECTION, JUNCTION_DAMPING,
        out,
    )
    out *= OUTPUT_GAIN

    fade = round(FADE_IN_S * sr)
    k = min(fade, n_samples)
    if k:
        out[:k] *= 0.5 - 0.5 * np.cos(np.pi * np.arange(k) / fade)
    return AudioClip(out, sr)
