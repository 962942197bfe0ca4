"""Device and channel parameter records plus their per-device sampling laws.

A profile is drawn once per device from configured uniform ranges; channels
are redrawn per frame. Defaults keep impairments small enough to pass for
manufacturing spread yet large enough for a classifier to pick up.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class FrameSpec:
    length: int = 256
    pilot_len: int = 32

    def __post_init__(self):
        if self.length <= 0 or not 0 <= self.pilot_len < self.length:
            raise ConfigError(f"invalid frame spec: length={self.length}, pilot_len={self.pilot_len}")


@dataclass(frozen=True)
class TransmitterProfile:
    """Realizes the transmit-side hardware signature."""

    iq_gain_imbalance: float = 1.0      # 1 = ideal
    iq_phase_imbalance: float = 0.0     # radians
    dc_offset: complex = 0j
    pa_cubic_coeff: complex = 0j        # memoryless third-order term
    cfo: float = 0.0                    # cycles/sample

    def __post_init__(self):
        if not -0.5 < self.cfo < 0.5:
            raise ConfigError(f"cfo {self.cfo} outside (-0.5, 0.5)")
        if abs(self.pa_cubic_coeff) >= 1 / 12:
            # keeps x + a3*|x|^2*x monotone in |x| on |x| <= 2
            raise ConfigError("pa_cubic_coeff too large for a monotone PA map")


@dataclass(frozen=True)
class ReceiverProfile:
    """Receive-side signature; adc_bits=0 disables quantization."""

    lna_cubic_coeff: complex = 0j
    iq_gain_imbalance: float = 1.0
    iq_phase_imbalance: float = 0.0
    dc_offset: complex = 0j
    lo_offset: float = 0.0              # cycles/sample
    adc_bits: int = 0

    def __post_init__(self):
        if not -0.5 < self.lo_offset < 0.5:
            raise ConfigError(f"lo_offset {self.lo_offset} outside (-0.5, 0.5)")
        if self.adc_bits != 0 and not 4 <= self.adc_bits <= 16:
            raise ConfigError(f"adc_bits {self.adc_bits} outside {{0}} u [4,16]")


@dataclass(frozen=True)
class ChannelRealization:
    taps: np.ndarray                    # short complex FIR, taps[0] != 0
    noise_sigma: float                  # per-sample complex-noise std

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.complex128)
        if taps.size == 0 or taps.size > 8 or taps[0] == 0:
            raise ConfigError("channel taps must be 1..8 entries with taps[0] != 0")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        object.__setattr__(self, "taps", taps)


@dataclass(frozen=True)
class ImpairmentRanges:
    """Uniform draw ranges for one device class."""

    gain_imbalance: tuple[float, float] = (0.9, 1.1)
    phase_imbalance: tuple[float, float] = (-0.1, 0.1)
    dc_magnitude: tuple[float, float] = (0.0, 0.05)
    cubic_real: tuple[float, float] = (-0.08, 0.0)
    cubic_imag: tuple[float, float] = (0.0, 0.0)
    freq_offset: tuple[float, float] = (-0.02, 0.02)   # cfo or lo offset
    freq_jitter: float = 0.0                           # per-frame oscillator drift
    adc_bits_choices: tuple[int, ...] = (10, 12)       # receivers only


@dataclass(frozen=True)
class ChannelLaw:
    """Per-frame channel sampling: 1..max_taps exponentially decaying taps
    with uniform phases; noise level fixed by the configured SNR."""

    max_taps: int = 4
    tap_decay: float = 1.0
    snr_db: float = 20.0

    def __post_init__(self):
        if not 1 <= self.max_taps <= 8:
            raise ConfigError(f"max_taps {self.max_taps} outside [1,8]")


def _draw(rng: np.random.Generator, lohi: tuple[float, float]) -> float:
    lo, hi = lohi
    return float(rng.uniform(lo, hi)) if hi > lo else float(lo)


def _draw_complex(rng: np.random.Generator, mag_range: tuple[float, float]) -> complex:
    mag = _draw(rng, mag_range)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    return mag * np.exp(1j * phase)


def sample_tx_profile(rng: np.random.Generator, r: ImpairmentRanges) -> TransmitterProfile:
    return TransmitterProfile(
        iq_gain_imbalance=_draw(rng, r.gain_imbalance),
        iq_phase_imbalance=_draw(rng, r.phase_imbalance),
        dc_offset=_draw_complex(rng, r.dc_magnitude),
        pa_cubic_coeff=complex(_draw(rng, r.cubic_real), _draw(rng, r.cubic_imag)),
        cfo=_draw(rng, r.freq_offset),
    )


def sample_rx_profile(rng: np.random.Generator, r: ImpairmentRanges) -> ReceiverProfile:
    return ReceiverProfile(
        lna_cubic_coeff=complex(_draw(rng, r.cubic_real), _draw(rng, r.cubic_imag)),
        iq_gain_imbalance=_draw(rng, r.gain_imbalance),
        iq_phase_imbalance=_draw(rng, r.phase_imbalance),
        dc_offset=_draw_complex(rng, r.dc_magnitude),
        lo_offset=_draw(rng, r.freq_offset),
        adc_bits=int(rng.choice(np.asarray(r.adc_bits_choices))),
    )


def sample_channel(rng: np.random.Generator, law: ChannelLaw) -> ChannelRealization:
    n_taps = int(rng.integers(1, law.max_taps + 1))
    mags = np.exp(-law.tap_decay * np.arange(n_taps))
    phases = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=n_taps))
    taps = mags * phases
    taps[0] = mags[0]  # real leading tap; the equalizer removes global phase anyway
    taps /= np.linalg.norm(taps)
    sigma = 10.0 ** (-law.snr_db / 20.0)
    return ChannelRealization(taps=taps, noise_sigma=sigma)
