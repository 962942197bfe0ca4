"""Synthetic multi-receiver I/Q fingerprint data."""

from .dataset import Dataset, DatasetSplit, GeneratorConfig, generate_dataset, split_by_receivers
from .io import load_dataset, load_sidecar, save_dataset
from .profiles import (
    ChannelLaw,
    ChannelRealization,
    FrameSpec,
    ImpairmentRanges,
    ReceiverProfile,
    TransmitterProfile,
    sample_channel,
    sample_rx_profile,
    sample_tx_profile,
)
from .signal import (
    QPSK,
    apply_channel,
    apply_rx_impairments,
    apply_tx_impairments,
    equalize,
    gen_baseband,
    pilot_symbols,
    quantize_midrise,
    to_iq_frame,
)

__all__ = [
    "ChannelLaw", "ChannelRealization", "Dataset", "DatasetSplit", "FrameSpec",
    "GeneratorConfig", "ImpairmentRanges", "QPSK", "ReceiverProfile",
    "TransmitterProfile", "apply_channel", "apply_rx_impairments",
    "apply_tx_impairments", "equalize", "gen_baseband", "generate_dataset",
    "load_dataset", "load_sidecar", "pilot_symbols", "quantize_midrise",
    "sample_channel", "sample_rx_profile", "sample_tx_profile", "save_dataset",
    "split_by_receivers", "to_iq_frame",
]
