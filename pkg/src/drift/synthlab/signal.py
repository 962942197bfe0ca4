"""Baseband frame synthesis and the impairment operator chain.

All signal math runs in complex128; frames are cast to float32 only at the
2xL output stage. Operators with zeroed parameters skip their sub-steps, so
a null profile is the identity map bit-for-bit.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .profiles import ChannelRealization, FrameSpec, ReceiverProfile, TransmitterProfile

# Unit-power QPSK alphabet.
QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j], dtype=np.complex128) / np.sqrt(2.0)

EQUALIZER_FLOOR = 1e-6
_RMS_EPS = 1e-12


def pilot_symbols(n: int) -> np.ndarray:
    """Fixed known pilot pattern: the QPSK alphabet cycled."""
    return QPSK[np.arange(n) % 4]


def gen_baseband(spec: FrameSpec, rng: np.random.Generator) -> np.ndarray:
    """Pilot prefix followed by uniformly random unit-power QPSK symbols."""
    data = QPSK[rng.integers(0, 4, size=spec.length - spec.pilot_len)]
    return np.concatenate([pilot_symbols(spec.pilot_len), data])


def apply_tx_impairments(s: np.ndarray, p: TransmitterProfile) -> np.ndarray:
    """IQ imbalance, then DC offset, then cubic PA, then CFO rotation."""
    x = s
    if p.iq_gain_imbalance != 1.0 or p.iq_phase_imbalance != 0.0:
        q = p.iq_gain_imbalance * (
            x.imag * np.cos(p.iq_phase_imbalance) + x.real * np.sin(p.iq_phase_imbalance)
        )
        x = x.real + 1j * q
    if p.dc_offset != 0:
        x = x + p.dc_offset
    if p.pa_cubic_coeff != 0:
        x = x + p.pa_cubic_coeff * np.abs(x) ** 2 * x
    if p.cfo != 0.0:
        x = x * np.exp(2j * np.pi * p.cfo * np.arange(len(x)))
    return np.asarray(x, dtype=np.complex128)


def apply_channel(s: np.ndarray, ch: ChannelRealization,
                  rng: np.random.Generator) -> np.ndarray:
    """Same-length linear convolution with the taps (tail truncated) plus
    circularly-symmetric complex Gaussian noise of std noise_sigma."""
    y = np.convolve(s, ch.taps)[: len(s)]
    if ch.noise_sigma > 0:
        scale = ch.noise_sigma / np.sqrt(2.0)
        noise = rng.standard_normal(len(s)) + 1j * rng.standard_normal(len(s))
        y = y + scale * noise
    return y


def quantize_midrise(x: np.ndarray, bits: int) -> np.ndarray:
    """Uniform mid-rise quantization of I and Q over [-A, A].

    A is 4x the input RMS snapped to the nearest power of two (a stepped
    AGC), which makes requantization of an already-quantized signal a no-op.
    """
    rms = np.sqrt(np.mean(np.abs(x) ** 2))
    if rms < _RMS_EPS:
        return x
    full_scale = 4.0 * 2.0 ** np.round(np.log2(rms))
    step = 2.0 * full_scale / 2 ** bits
    half = full_scale - step / 2.0

    def q(v):
        return np.clip(step * (np.floor(v / step) + 0.5), -half, half)

    return q(x.real) + 1j * q(x.imag)


def apply_rx_impairments(s: np.ndarray, p: ReceiverProfile) -> np.ndarray:
    """Cubic LNA, LO rotation, IQ imbalance, DC offset, then quantization."""
    x = s
    if p.lna_cubic_coeff != 0:
        x = x + p.lna_cubic_coeff * np.abs(x) ** 2 * x
    if p.lo_offset != 0.0:
        x = x * np.exp(2j * np.pi * p.lo_offset * np.arange(len(x)))
    if p.iq_gain_imbalance != 1.0 or p.iq_phase_imbalance != 0.0:
        q = p.iq_gain_imbalance * (
            x.imag * np.cos(p.iq_phase_imbalance) + x.real * np.sin(p.iq_phase_imbalance)
        )
        x = x.real + 1j * q
    if p.dc_offset != 0:
        x = x + p.dc_offset
    if p.adc_bits:
        x = quantize_midrise(x, p.adc_bits)
    return np.asarray(x, dtype=np.complex128)


def equalize(s: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Genie-aided zero-forcing: frequency-domain division by the channel
    response with a floor of EQUALIZER_FLOOR on |H|^2."""
    taps = np.asarray(taps, dtype=np.complex128)
    H = np.fft.fft(taps, n=len(s))
    denom = np.maximum(np.abs(H) ** 2, EQUALIZER_FLOOR)
    return np.fft.ifft(np.fft.fft(s) * np.conj(H) / denom)


def to_iq_frame(s: np.ndarray, length: int, normalize: bool = True) -> np.ndarray:
    """Stack a complex sequence into a float32 [2, L] frame (I row, Q row),
    normalized to unit RMS over all 2L entries unless nearly silent."""
    if len(s) != length:
        raise ShapeError(f"sequence length {len(s)} != frame length {length}")
    frame = np.stack([s.real, s.imag])
    if normalize:
        rms = np.sqrt(np.mean(frame**2))
        if rms >= _RMS_EPS:
            frame = frame / rms
    return frame.astype(np.float32)
