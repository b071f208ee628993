"""Control parameters of the vocal tract model and their normalization.

Eight bounded controls drive the synthesizer. All optimization runs in the
normalized unit box, so the affine maps between physical and normalized
coordinates live here, next to the bounds table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Canonical parameter order. Everything that flattens params to a vector
# (normalization, error reports, CSV columns) uses this order.
PARAM_NAMES = (
    "pitch_hz",
    "voiceness",
    "tongue_index",
    "tongue_diameter_cm",
    "lips_diameter_cm",
    "constriction_index",
    "constriction_diameter_cm",
    "throat_diameter_cm",
)

PARAM_BOUNDS = {
    "pitch_hz": (75.0, 330.0),
    "voiceness": (0.0, 1.0),
    "tongue_index": (14.0, 27.0),
    "tongue_diameter_cm": (1.55, 3.0),
    "lips_diameter_cm": (0.6, 1.2),
    "constriction_index": (12.0, 42.0),
    "constriction_diameter_cm": (0.6, 1.2),
    "throat_diameter_cm": (0.5, 1.0),
}

LOWER_BOUNDS = np.array([PARAM_BOUNDS[n][0] for n in PARAM_NAMES])
UPPER_BOUNDS = np.array([PARAM_BOUNDS[n][1] for n in PARAM_NAMES])
N_PARAMS = len(PARAM_NAMES)


@dataclass(frozen=True)
class TractParams:
    """One full articulatory configuration, validated against the bounds table."""

    pitch_hz: float
    voiceness: float
    tongue_index: float
    tongue_diameter_cm: float
    lips_diameter_cm: float
    constriction_index: float
    constriction_diameter_cm: float
    throat_diameter_cm: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            lo, hi = PARAM_BOUNDS[name]
            if not lo <= value <= hi:
                raise ValueError(
                    f"{name}={value!r} outside bounds [{lo}, {hi}]"
                )

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> "TractParams":
        values = np.asarray(values, dtype=float)
        if values.shape != (N_PARAMS,):
            raise ValueError(f"expected {N_PARAMS} values, got shape {values.shape}")
        return cls(*values.tolist())

    def as_dict(self) -> dict:
        return {n: float(getattr(self, n)) for n in PARAM_NAMES}

    @classmethod
    def from_dict(cls, d: dict) -> "TractParams":
        missing = [n for n in PARAM_NAMES if n not in d]
        if missing:
            raise ValueError(f"missing parameters: {missing}")
        return cls(**{n: float(d[n]) for n in PARAM_NAMES})

    @classmethod
    def midpoint(cls) -> "TractParams":
        return cls.from_array(0.5 * (LOWER_BOUNDS + UPPER_BOUNDS))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "TractParams":
        """Draw uniformly inside the bounds box."""
        return cls.from_array(rng.uniform(LOWER_BOUNDS, UPPER_BOUNDS))


@dataclass(frozen=True)
class NormalizedParams:
    """The same eight controls rescaled into the unit box."""

    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.shape != (N_PARAMS,):
            raise ValueError(f"expected {N_PARAMS} components, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("normalized parameters must be finite")
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise ValueError(f"normalized parameters outside [0, 1]: {x}")
        object.__setattr__(self, "x", x)


def normalize(p: TractParams) -> NormalizedParams:
    """Map physical parameters onto [0, 1] per component."""
    x = (p.as_array() - LOWER_BOUNDS) / (UPPER_BOUNDS - LOWER_BOUNDS)
    # Guard against float round-off at the box edges.
    return NormalizedParams(np.clip(x, 0.0, 1.0))


def denormalize(x) -> TractParams:
    """Inverse of :func:`normalize`; accepts a NormalizedParams or a unit 8-vector."""
    if isinstance(x, NormalizedParams):
        vec = x.x
    else:
        vec = NormalizedParams(np.asarray(x, dtype=float)).x
    return TractParams.from_array(LOWER_BOUNDS + vec * (UPPER_BOUNDS - LOWER_BOUNDS))


def normalized_array(p: TractParams) -> np.ndarray:
    """Convenience: normalized parameters as a bare 8-vector."""
    return normalize(p).x


@dataclass(frozen=True)
class ParamTrajectory:
    """Piecewise-linear parameter automation given as (time_s, params) keyframes.

    Times must be strictly increasing and start at 0. Interpolation happens in
    normalized space; past the last keyframe the value is held.
    """

    keyframes: tuple

    def __post_init__(self):
        frames = tuple(self.keyframes)
        if len(frames) < 1:
            raise ValueError("trajectory needs at least one keyframe")
        times = [t for t, _ in frames]
        if times[0] != 0.0:
            raise ValueError(f"first keyframe must be at t=0, got {times[0]}")
        if any(t1 >= t2 for t1, t2 in zip(times, times[1:])):
            raise ValueError("keyframe times must be strictly increasing")
        for _, p in frames:
            if not isinstance(p, TractParams):
                raise TypeError("keyframe values must be TractParams")
        object.__setattr__(self, "keyframes", frames)

    def sample_normalized(self, times_s) -> np.ndarray:
        """Normalized parameter vectors at the requested times, shape (len(times), 8)."""
        times_s = np.asarray(times_s, dtype=float)
        key_t = np.array([t for t, _ in self.keyframes])
        key_x = np.stack([normalized_array(p) for _, p in self.keyframes])
        out = np.empty((len(times_s), N_PARAMS))
        for j, t in enumerate(times_s):
            if t <= key_t[0]:
                out[j] = key_x[0]
            elif t >= key_t[-1]:
                out[j] = key_x[-1]
            else:
                k = int(np.searchsorted(key_t, t, side="right")) - 1
                alpha = (t - key_t[k]) / (key_t[k + 1] - key_t[k])
                # x0 + alpha*(x1-x0) so equal keyframes interpolate bit-exactly
                out[j] = key_x[k] + alpha * (key_x[k + 1] - key_x[k])
        return out


@dataclass(frozen=True)
class SynthConfig:
    """Synthesis engine settings; the defaults match the benchmark pipeline."""

    sample_rate_hz: int = 48000
    tract_sections: int = 44
    control_block_samples: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.tract_sections < 2:
            raise ValueError("tract_sections must be at least 2")
        if self.control_block_samples < 1:
            raise ValueError("control_block_samples must be at least 1")
