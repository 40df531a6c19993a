"""Mono WAV I/O (16-bit PCM or 32-bit float RIFF)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from ..errors import AudioError
from .buffers import AudioBuffer


def read_wav(path: str | Path) -> AudioBuffer:
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise AudioError(f"cannot read WAV {path}: {exc}") from exc
    if data.ndim != 1:
        raise AudioError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    else:
        raise AudioError(f"{path}: unsupported sample format {data.dtype}")
    return AudioBuffer(int(rate), samples)


def write_wav(path: str | Path, buf: AudioBuffer, *,
              fmt: str = "int16") -> None:
    """Write a buffer as RIFF WAV; fmt is 'int16' (default) or 'float32'."""
    path = Path(path)
    if fmt == "int16":
        clipped = np.clip(buf.samples, -1.0, 1.0)
        data = np.round(clipped * 32767.0).astype(np.int16)
    elif fmt == "float32":
        data = buf.samples.astype(np.float32)
    else:
        raise AudioError(f"unsupported WAV format '{fmt}'")
    wavfile.write(path, buf.sample_rate_hz, data)
