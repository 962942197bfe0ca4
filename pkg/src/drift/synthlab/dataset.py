"""Labeled multi-receiver dataset generation and receiver-disjoint splits.

Every sample owns an independent random substream keyed by
(seed, stream tag, day, transmitter, receiver, index), so generation order
never affects content and parallel generation would be bit-identical to
serial. Transmitter/receiver labels are 1-based device indices; trainers map
them to 0-based class ids at batch assembly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import ConfigError
from ..util import STREAM_FRAME, STREAM_RX_PROFILE, STREAM_TX_PROFILE, substream
from .profiles import (
    ChannelLaw,
    FrameSpec,
    ImpairmentRanges,
    sample_channel,
    sample_rx_profile,
    sample_tx_profile,
)
from .signal import apply_channel, apply_rx_impairments, apply_tx_impairments, equalize, gen_baseband, to_iq_frame


@dataclass(frozen=True)
class GeneratorConfig:
    k_tx: int
    m_rx: int
    samples_per_pair: int
    seed: int
    day: int = 0  # channel-perturbation tag: redraws channels, not devices
    frame: FrameSpec = field(default_factory=FrameSpec)
    tx_ranges: ImpairmentRanges = field(default_factory=ImpairmentRanges)
    rx_ranges: ImpairmentRanges = field(default_factory=ImpairmentRanges)
    channel: ChannelLaw = field(default_factory=ChannelLaw)
    normalize: bool = True

    def __post_init__(self):
        if self.k_tx < 2 or self.m_rx < 2 or self.samples_per_pair < 1:
            raise ConfigError(
                f"need k_tx >= 2, m_rx >= 2, samples_per_pair >= 1; got "
                f"({self.k_tx}, {self.m_rx}, {self.samples_per_pair})"
            )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Dataset:
    """Column-oriented sample store; `uid` is the stable per-sample identity
    used by the protocol-hygiene audit."""

    x: np.ndarray       # [N, 2, L] float32
    y: np.ndarray       # [N] uint16, 1-based transmitter label
    d: np.ndarray       # [N] uint16, 1-based receiver label
    uid: np.ndarray     # [N] int64
    k_tx: int
    m_rx: int

    def __len__(self):
        return len(self.y)

    @property
    def frame_len(self) -> int:
        return self.x.shape[2]

    def subset(self, mask_or_idx) -> "Dataset":
        return Dataset(self.x[mask_or_idx], self.y[mask_or_idx], self.d[mask_or_idx],
                       self.uid[mask_or_idx], self.k_tx, self.m_rx)

    def receivers(self) -> list[int]:
        return sorted(int(v) for v in np.unique(self.d))


@dataclass(frozen=True)
class DatasetSplit:
    train: Dataset
    test: Dataset
    train_receivers: tuple[int, ...]
    test_receivers: tuple[int, ...]


def draw_profiles(cfg: GeneratorConfig):
    tx = {y: sample_tx_profile(substream(cfg.seed, STREAM_TX_PROFILE, y), cfg.tx_ranges)
          for y in range(1, cfg.k_tx + 1)}
    rx = {d: sample_rx_profile(substream(cfg.seed, STREAM_RX_PROFILE, d), cfg.rx_ranges)
          for d in range(1, cfg.m_rx + 1)}
    return tx, rx


def synthesize_frame(cfg: GeneratorConfig, tx_profile, rx_profile,
                     rng: np.random.Generator) -> np.ndarray:
    """One end-to-end frame: baseband, transmit chain, channel, receive
    chain, genie equalization, I/Q stacking.

    Oscillators drift between captures, so each frame's effective frequency
    offsets wobble around the device values by the configured jitter.
    """
    ch = sample_channel(rng, cfg.channel)
    s = gen_baseband(cfg.frame, rng)
    tx_j, rx_j = cfg.tx_ranges.freq_jitter, cfg.rx_ranges.freq_jitter
    if tx_j:
        tx_profile = replace(tx_profile, cfo=tx_profile.cfo + rng.uniform(-tx_j, tx_j))
    s = apply_tx_impairments(s, tx_profile)
    s = apply_channel(s, ch, rng)
    if rx_j:
        rx_profile = replace(rx_profile, lo_offset=rx_profile.lo_offset + rng.uniform(-rx_j, rx_j))
    s = apply_rx_impairments(s, rx_profile)
    s = equalize(s, ch.taps)
    return to_iq_frame(s, cfg.frame.length, normalize=cfg.normalize)


def generate_dataset(cfg: GeneratorConfig) -> Dataset:
    """K*M*samples_per_pair labeled frames, a pure function of the config."""
    tx_profiles, rx_profiles = draw_profiles(cfg)
    n = cfg.samples_per_pair
    total = cfg.k_tx * cfg.m_rx * n
    x = np.empty((total, 2, cfg.frame.length), dtype=np.float32)
    y = np.empty(total, dtype=np.uint16)
    d = np.empty(total, dtype=np.uint16)
    row = 0
    for yi in range(1, cfg.k_tx + 1):
        for di in range(1, cfg.m_rx + 1):
            for idx in range(n):
                rng = substream(cfg.seed, STREAM_FRAME, cfg.day, yi, di, idx)
                x[row] = synthesize_frame(cfg, tx_profiles[yi], rx_profiles[di], rng)
                y[row] = yi
                d[row] = di
                row += 1
    return Dataset(x, y, d, np.arange(total, dtype=np.int64), cfg.k_tx, cfg.m_rx)


def split_by_receivers(ds: Dataset, train_receivers, test_receivers) -> DatasetSplit:
    """Leave-receivers-out split; receiver sets must be disjoint and both
    sides must cover every transmitter."""
    train_rx = tuple(sorted(int(r) for r in train_receivers))
    test_rx = tuple(sorted(int(r) for r in test_receivers))
    if set(train_rx) & set(test_rx):
        raise ConfigError(f"train/test receivers overlap: {set(train_rx) & set(test_rx)}")
    known = set(ds.receivers())
    missing = (set(train_rx) | set(test_rx)) - known
    if missing:
        raise ConfigError(f"receivers {sorted(missing)} not present in dataset")
    train = ds.subset(np.isin(ds.d, train_rx))
    test = ds.subset(np.isin(ds.d, test_rx))
    for name, part in (("train", train), ("test", test)):
        if len(np.unique(part.y)) != ds.k_tx:
            raise ConfigError(f"{name} split does not cover all {ds.k_tx} transmitters")
    return DatasetSplit(train, test, train_rx, test_rx)
