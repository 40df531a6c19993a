"""Immutable mono audio buffers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import AudioError


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio: sample rate plus float64 samples nominally in [-1, 1].

    Samples are stored read-only; operations return new buffers.
    """

    sample_rate_hz: int
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise AudioError(f"sample rate must be positive, "
                             f"got {self.sample_rate_hz}")
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise AudioError(f"expected mono (1-D) samples, got shape "
                             f"{arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise AudioError("samples contain NaN or Inf")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_ms(self) -> float:
        return 1000.0 * self.samples.shape[0] / self.sample_rate_hz

    def rms(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.sqrt(np.mean(self.samples ** 2)))

    def with_samples(self, samples: np.ndarray) -> "AudioBuffer":
        return AudioBuffer(self.sample_rate_hz, samples)


@dataclass(frozen=True)
class LevelDb:
    """Level in dB relative to full scale; RMS 1.0 is 0 dB."""

    value: float

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise AudioError(f"level must be finite, got {self.value}")

    def linear(self) -> float:
        return 10.0 ** (self.value / 20.0)


DEFAULT_TARGET_RMS = LevelDb(-26.0)
