"""G.711 mu-law companding and the narrowband PCMU treatment chain.

The companding law works in the 14-bit linear domain [-8159, +8159]
(values outside are clipped). Decode returns the segment midpoint of each
codeword as a float; the negative-zero codeword decodes to -0.0 so that
encode(decode(c)) round-trips every one of the 256 codewords.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import AudioError
from . import _kernels
from .buffers import AudioBuffer
from .dsp import resample

MULAW_MAX = 8159  # clipping limit of the linear domain
MULAW_BIAS = 33


def _build_decode_table() -> np.ndarray:
    table = np.empty(256, dtype=np.float64)
    for code in range(256):
        u = ~code & 0xFF
        seg = (u >> 4) & 0x07
        quant = u & 0x0F
        magnitude = (2 * quant + 33) * (1 << seg) - 33
        if u & 0x80:  # inverted sign bit set -> negative value
            table[code] = -float(magnitude)
        else:
            table[code] = float(magnitude)
    return table


DECODE_TABLE = _build_decode_table()
DECODE_TABLE.flags.writeable = False


def mulaw_encode_array(samples: np.ndarray) -> np.ndarray:
    """Encode an array of 14-bit linear values (int or float) to codewords."""
    x = np.asarray(samples, dtype=np.float64)
    negative = np.signbit(x)
    mag = np.abs(x)
    mag = np.minimum(np.floor(mag + 0.5), MULAW_MAX).astype(np.int64)
    out = np.empty(x.shape[0], dtype=np.int64)
    _kernels.mulaw_encode_raw(mag, negative, out)
    return out.astype(np.uint8)


def mulaw_decode_array(codes: np.ndarray) -> np.ndarray:
    codes = np.asarray(codes)
    if codes.size and (codes.min() < 0 or codes.max() > 255):
        raise AudioError("codewords must be in [0, 255]")
    return DECODE_TABLE[codes.astype(np.int64)]


def mulaw_encode(sample: float | int) -> int:
    """Encode one 14-bit linear sample; out-of-domain values are clipped."""
    return int(mulaw_encode_array(np.array([sample], dtype=np.float64))[0])


def mulaw_decode(code: int) -> float:
    """Decode one codeword to its segment-midpoint linear value."""
    if not 0 <= code <= 255:
        raise AudioError(f"codeword {code} out of [0, 255]")
    return float(DECODE_TABLE[code])


def mulaw_step_size(linear_value: float) -> int:
    """Quantizer step size of the segment holding the given linear value."""
    mag = min(abs(linear_value), MULAW_MAX)
    biased = min(int(mag) + MULAW_BIAS, 8191)
    seg = 0
    t = biased >> 6
    while t:
        seg += 1
        t >>= 1
    return 2 << seg


def apply_pcmu_nb(buf: AudioBuffer) -> AudioBuffer:
    """Narrowband PCMU chain: 16 kHz -> 8 kHz -> mu-law -> back to 16 kHz.

    Floats in [-1, 1] scale linearly onto the 14-bit domain (gain 8159,
    round half away from zero). Energy above 4 kHz ends up >= 40 dB down;
    duration is preserved within +/-2 ms.
    """
    if buf.sample_rate_hz != 16000:
        raise AudioError(f"PCMU chain expects 16 kHz input, got "
                         f"{buf.sample_rate_hz}")
    nb = resample(buf, 8000)
    codes = mulaw_encode_array(nb.samples * MULAW_MAX)
    decoded = mulaw_decode_array(codes) / MULAW_MAX
    return resample(AudioBuffer(8000, decoded), 16000)


def run_external_condition(buf: AudioBuffer, command: list[str],
                           workdir=None) -> AudioBuffer:
    """Round-trip audio through a user-supplied codec command.

    The command is run with two extra arguments, the input and output WAV
    paths; the re-ingested output becomes the treated buffer. Supports
    conditions (e.g. AMR) that are not built in.
    """
    import subprocess
    import tempfile
    from pathlib import Path

    from .wavio import read_wav, write_wav

    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        src = Path(tmp) / "in.wav"
        dst = Path(tmp) / "out.wav"
        write_wav(src, buf)
        proc = subprocess.run([*command, str(src), str(dst)],
                              capture_output=True, text=True)
        if proc.returncode != 0:
            raise AudioError(f"external condition command failed "
                             f"({proc.returncode}): {proc.stderr.strip()}")
        if not dst.exists():
            raise AudioError("external condition command produced no output")
        out = read_wav(dst)
    if math.isclose(out.duration_ms, buf.duration_ms, abs_tol=50.0):
        return out
    raise AudioError(f"external condition changed duration from "
                     f"{buf.duration_ms:.1f} ms to {out.duration_ms:.1f} ms")
