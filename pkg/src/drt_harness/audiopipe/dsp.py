"""Deterministic signal curation: resampling, margins, fades, levels, mixing."""

from __future__ import annotations

import math

import numpy as np

from ..errors import AudioError
from . import _kernels
from .buffers import AudioBuffer, LevelDb, DEFAULT_TARGET_RMS

# Kaiser-windowed sinc anti-alias design. 80 dB design attenuation keeps
# the passband (<= 0.45 * min rate) flat within ~0.001 dB and the stopband
# (>= 0.5 * min rate) at least 60 dB down.
_STOPBAND_DB = 80.0
_PASSBAND_FRACTION = 0.45
_STOPBAND_FRACTION = 0.50


def _design_lowpass(up_rate: float, min_rate: float, gain: float) -> tuple[np.ndarray, int]:
    cutoff = 0.5 * (_PASSBAND_FRACTION + _STOPBAND_FRACTION) * min_rate
    transition = (_STOPBAND_FRACTION - _PASSBAND_FRACTION) * min_rate
    delta_w = 2.0 * math.pi * transition / up_rate
    beta = 0.1102 * (_STOPBAND_DB - 8.7)
    n_taps = int(math.ceil((_STOPBAND_DB - 7.95) / (2.285 * delta_w))) + 1
    if n_taps % 2 == 0:
        n_taps += 1
    delay = (n_taps - 1) // 2
    fc = cutoff / up_rate  # cycles per upsampled sample, in (0, 0.5)
    k = np.arange(n_taps) - delay
    h = 2.0 * fc * np.sinc(2.0 * fc * k) * np.kaiser(n_taps, beta)
    h *= gain / np.sum(h)  # DC gain = upsampling factor
    return h, delay


def resample(buf: AudioBuffer, target_rate_hz: int) -> AudioBuffer:
    """Rational-ratio polyphase resampling with a windowed-sinc lowpass.

    Preserves duration within one sample and passband amplitude
    (<= 0.45 * min(rates)) within 0.1 dB; identical rates return the
    buffer unchanged.
    """
    if target_rate_hz <= 0:
        raise AudioError(f"target rate must be positive, got {target_rate_hz}")
    src = buf.sample_rate_hz
    if target_rate_hz == src:
        return buf
    g = math.gcd(src, target_rate_hz)
    up = target_rate_hz // g
    down = src // g
    n_in = len(buf)
    n_out = (2 * n_in * up + down) // (2 * down)  # round(n_in * up / down)
    if n_in == 0:
        return AudioBuffer(target_rate_hz, np.zeros(0))
    h, delay = _design_lowpass(up_rate=src * up,
                               min_rate=min(src, target_rate_hz),
                               gain=float(up))
    y = _kernels.polyphase_resample(buf.samples, h, up, down, delay, n_out)
    return AudioBuffer(target_rate_hz, y)


def _frame_energies(x: np.ndarray, frame_len: int) -> np.ndarray:
    n_frames = (x.shape[0] + frame_len - 1) // frame_len
    out = np.empty(n_frames)
    for i in range(n_frames):
        seg = x[i * frame_len:(i + 1) * frame_len]
        out[i] = float(np.mean(seg ** 2))
    return out


def trim_to_margins(buf: AudioBuffer, lead_ms: float = 500.0,
                    trail_ms: float = 500.0, *, frame_ms: float = 10.0,
                    silence_rel_db: float = -40.0) -> AudioBuffer:
    """Crop so exactly lead_ms precedes speech onset and trail_ms follows offset.

    Activity detection: 10 ms frame energies; frames more than 40 dB below
    the peak frame count as silence. Zero-pads when the source has less
    margin than requested. Raises AudioError for all-silent input.
    """
    fs = buf.sample_rate_hz
    frame_len = max(1, int(round(frame_ms * fs / 1000.0)))
    energies = _frame_energies(buf.samples, frame_len)
    peak = float(np.max(energies)) if energies.size else 0.0
    if peak <= 0.0:
        raise AudioError("no speech activity detected (all-silent input)")
    active = energies >= peak * 10.0 ** (silence_rel_db / 10.0)
    first = int(np.argmax(active))
    last = int(len(active) - 1 - np.argmax(active[::-1]))
    onset = first * frame_len
    offset = min((last + 1) * frame_len, len(buf))

    lead = int(round(lead_ms * fs / 1000.0))
    trail = int(round(trail_ms * fs / 1000.0))
    start = onset - lead
    end = offset + trail
    pad_front = max(0, -start)
    pad_back = max(0, end - len(buf))
    core = buf.samples[max(0, start):min(len(buf), end)]
    out = np.concatenate([np.zeros(pad_front), core, np.zeros(pad_back)])
    return AudioBuffer(fs, out)


def fade(buf: AudioBuffer, fade_ms: float = 10.0) -> AudioBuffer:
    """Raised-cosine fade-in/out over fade_ms at each end.

    First and last samples become exactly 0; samples beyond the ramps are
    untouched. fade_ms = 0 is the identity.
    """
    if fade_ms < 0:
        raise AudioError(f"fade length must be non-negative, got {fade_ms}")
    fs = buf.sample_rate_hz
    n_fade = int(round(fade_ms * fs / 1000.0))
    if n_fade == 0:
        return buf
    if 2 * n_fade > len(buf):
        raise AudioError(f"fade of {fade_ms} ms (2x{n_fade} samples) exceeds "
                         f"buffer of {len(buf)} samples")
    ramp = 0.5 * (1.0 - np.cos(np.pi * np.arange(n_fade) / n_fade))
    out = buf.samples.copy()
    out[:n_fade] *= ramp
    out[-n_fade:] *= ramp[::-1]
    return AudioBuffer(fs, out)


def normalize_rms(buf: AudioBuffer,
                  target: LevelDb = DEFAULT_TARGET_RMS) -> AudioBuffer:
    """Pure gain scaling the buffer to the target RMS level (default -26 dB)."""
    rms = buf.rms()
    if rms <= 0.0:
        raise AudioError("cannot normalize silent input (RMS is zero)")
    gain = target.linear() / rms
    return AudioBuffer(buf.sample_rate_hz, buf.samples * gain)


def mix_at_snr(speech: AudioBuffer, noise: AudioBuffer, snr_db: float,
               *, seed: int = 0) -> AudioBuffer:
    """Add noise scaled so speech RMS / noise RMS hits snr_db; speech unscaled.

    The noise segment starts at a seeded random offset and is cropped to
    the speech length; the gain is computed from the cropped segment so
    the realized SNR matches exactly. snr_db = +inf returns the speech
    unchanged.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return speech
    if speech.sample_rate_hz != noise.sample_rate_hz:
        raise AudioError(f"sample rates differ: speech "
                         f"{speech.sample_rate_hz}, noise {noise.sample_rate_hz}")
    if len(noise) < len(speech):
        raise AudioError(f"noise ({len(noise)} samples) shorter than speech "
                         f"({len(speech)} samples)")
    rng = np.random.Generator(np.random.PCG64(seed))
    offset = int(rng.integers(0, len(noise) - len(speech) + 1))
    segment = noise.samples[offset:offset + len(speech)]
    rms_n = float(np.sqrt(np.mean(segment ** 2))) if len(speech) else 0.0
    if rms_n <= 0.0:
        raise AudioError("noise segment is silent")
    gain = (speech.rms() / rms_n) / (10.0 ** (snr_db / 20.0))
    return AudioBuffer(speech.sample_rate_hz, speech.samples + gain * segment)


def _mean_power_spectrum(buffers: list[AudioBuffer], nfft: int) -> np.ndarray:
    window = np.hanning(nfft)
    acc = np.zeros(nfft // 2 + 1)
    count = 0
    for buf in buffers:
        x = buf.samples
        if x.shape[0] < nfft:
            seg = np.zeros(nfft)
            seg[:x.shape[0]] = x
            acc += np.abs(np.fft.rfft(seg * window)) ** 2
            count += 1
            continue
        hop = nfft // 2
        for start in range(0, x.shape[0] - nfft + 1, hop):
            seg = x[start:start + nfft] * window
            acc += np.abs(np.fft.rfft(seg)) ** 2
            count += 1
    return acc / count


def speech_shaped_noise(reference: list[AudioBuffer], duration_ms: float,
                        seed: int, *, nfft: int = 4096) -> AudioBuffer:
    """Gaussian noise spectrally shaped to the corpus long-term spectrum.

    The long-term average spectrum of the reference corpus is estimated by
    Welch averaging, then imposed on seeded white noise in the frequency
    domain. Deterministic given the seed; output duration is exact.
    """
    if not reference:
        raise AudioError("reference corpus is empty")
    rates = sorted({b.sample_rate_hz for b in reference})
    if len(rates) > 1:
        raise AudioError(f"reference corpus mixes sample rates {rates}")
    fs = rates[0]
    psd = _mean_power_spectrum(reference, nfft)
    mag = np.sqrt(psd)
    peak = float(np.max(mag))
    if peak <= 0.0:
        raise AudioError("reference corpus is silent")
    mag /= peak

    n = int(round(duration_ms * fs / 1000.0))
    rng = np.random.Generator(np.random.PCG64(seed))
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    grid = np.arange(nfft // 2 + 1) * (fs / nfft)
    freqs = np.arange(spectrum.shape[0]) * (fs / n)
    envelope = np.interp(freqs, grid, mag)
    shaped = np.fft.irfft(spectrum * envelope, n)

    # Keep a sane level: match the corpus mean RMS.
    target = float(np.mean([b.rms() for b in reference]))
    rms = float(np.sqrt(np.mean(shaped ** 2)))
    if rms > 0.0 and target > 0.0:
        shaped *= target / rms
    return AudioBuffer(fs, shaped)
