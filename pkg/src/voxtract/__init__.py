"""voxtract: waveguide vocal-tract synthesis and black-box parameter recovery."""

__version__ = "0.1.0"

from .audio_io import AudioClip, add_noise_snr, read_wav, write_wav
from .params import (
    N_PARAMS,
    PARAM_BOUNDS,
    PARAM_NAMES,
    NormalizedParams,
    ParamTrajectory,
    SynthConfig,
    TractParams,
    denormalize,
    normalize,
)
from .vocal_tract import (
    DiameterProfile,
    glottal_source,
    map_params_to_diameters,
    synthesize_static,
    synthesize_trajectory,
)

__all__ = [
    "AudioClip",
    "DiameterProfile",
    "N_PARAMS",
    "NormalizedParams",
    "PARAM_BOUNDS",
    "PARAM_NAMES",
    "ParamTrajectory",
    "SynthConfig",
    "TractParams",
    "add_noise_snr",
    "denormalize",
    "glottal_source",
    "map_params_to_diameters",
    "normalize",
    "read_wav",
    "synthesize_static",
    "synthesize_trajectory",
    "write_wav",
]
