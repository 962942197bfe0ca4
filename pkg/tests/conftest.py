import numpy as np
import pytest

from drift.synthlab import ChannelLaw, FrameSpec, GeneratorConfig, ImpairmentRanges, generate_dataset

# Wide impairment draws so tiny datasets stay separable.
STRONG = ImpairmentRanges(
    gain_imbalance=(0.7, 1.3),
    phase_imbalance=(-0.3, 0.3),
    dc_magnitude=(0.0, 0.15),
    cubic_real=(-0.08, 0.0),
    freq_offset=(-0.05, 0.05),
    adc_bits_choices=(8, 10, 12),
)


def tiny_generator_config(k=3, m=3, n=24, seed=11, length=64, pilot=8):
    return GeneratorConfig(
        k_tx=k, m_rx=m, samples_per_pair=n, seed=seed,
        frame=FrameSpec(length=length, pilot_len=pilot),
        tx_ranges=STRONG, rx_ranges=STRONG,
        channel=ChannelLaw(max_taps=2, snr_db=25.0),
    )


@pytest.fixture(scope="session")
def tiny_dataset():
    return generate_dataset(tiny_generator_config())


def rand(shape, seed, dtype=np.float64):
    return np.random.default_rng(seed).standard_normal(shape).astype(dtype)
