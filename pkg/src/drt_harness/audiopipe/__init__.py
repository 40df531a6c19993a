"""Audio curation and treatment conditions."""

from .buffers import AudioBuffer, LevelDb, DEFAULT_TARGET_RMS
from .codec import (
    DECODE_TABLE,
    MULAW_BIAS,
    MULAW_MAX,
    apply_pcmu_nb,
    mulaw_decode,
    mulaw_decode_array,
    mulaw_encode,
    mulaw_encode_array,
    mulaw_step_size,
    run_external_condition,
)
from .dsp import (
    fade,
    mix_at_snr,
    normalize_rms,
    resample,
    speech_shaped_noise,
    trim_to_margins,
)
from .wavio import read_wav, write_wav
from ._kernels import USE_NUMBA

__all__ = [
    "AudioBuffer", "LevelDb", "DEFAULT_TARGET_RMS",
    "resample", "trim_to_margins", "fade", "normalize_rms",
    "mix_at_snr", "speech_shaped_noise",
    "mulaw_encode", "mulaw_decode", "mulaw_encode_array",
    "mulaw_decode_array", "mulaw_step_size", "apply_pcmu_nb",
    "run_external_condition", "read_wav", "write_wav",
    "DECODE_TABLE", "MULAW_MAX", "MULAW_BIAS", "USE_NUMBA",
]
