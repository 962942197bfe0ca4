"""Signal-chain oracles: every operator against direct evaluation, plus the
dataset generation contracts."""

import numpy as np
import pytest

from conftest import STRONG, tiny_generator_config
from drift.errors import ConfigError, FormatError, ShapeError
from drift.synthlab import (
    ChannelLaw,
    ChannelRealization,
    FrameSpec,
    GeneratorConfig,
    ImpairmentRanges,
    QPSK,
    ReceiverProfile,
    TransmitterProfile,
    apply_channel,
    apply_rx_impairments,
    apply_tx_impairments,
    equalize,
    gen_baseband,
    generate_dataset,
    load_dataset,
    load_sidecar,
    quantize_midrise,
    save_dataset,
    split_by_receivers,
    to_iq_frame,
)
from drift.synthlab.dataset import draw_profiles, synthesize_frame

RNG = lambda s=0: np.random.default_rng(s)


# -------------------------------------------------------------- baseband


def test_baseband_length_and_alphabet():
    s = gen_baseband(FrameSpec(length=256, pilot_len=32), RNG())
    assert len(s) == 256
    dists = np.abs(s[:, None] - QPSK[None, :]).min(axis=1)
    assert np.all(dists < 1e-12)


def test_baseband_mean_power_monte_carlo():
    spec = FrameSpec(length=100_000, pilot_len=0)
    s = gen_baseband(spec, RNG(1))
    assert abs(np.mean(np.abs(s) ** 2) - 1.0) < 0.01


def test_baseband_pilot_is_fixed():
    a = gen_baseband(FrameSpec(64, 16), RNG(1))
    b = gen_baseband(FrameSpec(64, 16), RNG(2))
    assert np.array_equal(a[:16], b[:16])
    assert not np.array_equal(a[16:], b[16:])


# ------------------------------------------------------------ tx chain


def test_tx_null_profile_is_identity():
    s = gen_baseband(FrameSpec(64, 8), RNG(3))
    assert np.array_equal(apply_tx_impairments(s, TransmitterProfile()), s)


def test_tx_dc_offset_on_silence():
    out = apply_tx_impairments(np.zeros(5, dtype=complex),
                               TransmitterProfile(dc_offset=0.1 + 0j))
    assert np.allclose(out, 0.1)


def test_tx_cubic_pa_direct():
    out = apply_tx_impairments(np.array([1.0 + 0j]),
                               TransmitterProfile(pa_cubic_coeff=-0.05))
    assert np.allclose(out, 0.95)


def test_tx_iq_imbalance_formula():
    s = np.array([0.3 - 0.7j])
    g, phi = 1.05, 0.04
    out = apply_tx_impairments(s, TransmitterProfile(iq_gain_imbalance=g, iq_phase_imbalance=phi))
    want_q = g * (s.imag * np.cos(phi) + s.real * np.sin(phi))
    assert np.allclose(out, s.real + 1j * want_q)


def test_tx_profile_validation():
    with pytest.raises(ConfigError):
        TransmitterProfile(cfo=0.6)
    with pytest.raises(ConfigError):
        TransmitterProfile(pa_cubic_coeff=-0.2)


# ------------------------------------------------------------- channel


def test_channel_identity_tap():
    s = gen_baseband(FrameSpec(32, 4), RNG(4))
    ch = ChannelRealization(taps=np.array([1.0 + 0j]), noise_sigma=0.0)
    assert np.array_equal(apply_channel(s, ch, RNG(0)), s)


def test_channel_convolution_oracle():
    ch = ChannelRealization(taps=np.array([1.0, 0.5]), noise_sigma=0.0)
    out = apply_channel(np.array([1.0 + 0j, 0, 0]), ch, RNG(0))
    assert np.allclose(out, [1.0, 0.5, 0.0])


def test_channel_noiseless_deterministic():
    s = gen_baseband(FrameSpec(32, 4), RNG(5))
    ch = ChannelRealization(taps=np.array([1.0, 0.2 + 0.1j]), noise_sigma=0.0)
    assert np.array_equal(apply_channel(s, ch, RNG(1)), apply_channel(s, ch, RNG(2)))


def test_channel_validation():
    with pytest.raises(ConfigError):
        ChannelRealization(taps=np.array([0.0, 1.0]), noise_sigma=0.0)
    with pytest.raises(ConfigError):
        ChannelRealization(taps=np.array([1.0]), noise_sigma=-1.0)


# ------------------------------------------------------------- rx chain


def test_rx_null_profile_is_identity():
    s = gen_baseband(FrameSpec(64, 8), RNG(6))
    assert np.array_equal(apply_rx_impairments(s, ReceiverProfile()), s)


def test_rx_lo_rotation_oracle():
    out = apply_rx_impairments(np.ones(4, dtype=complex), ReceiverProfile(lo_offset=0.25))
    assert np.allclose(out, [1, 1j, -1, -1j], atol=1e-12)


def test_rx_quantizer_idempotent():
    s = gen_baseband(FrameSpec(256, 0), RNG(7)) * 0.9
    p = ReceiverProfile(adc_bits=8)
    once = apply_rx_impairments(s, p)
    twice = apply_rx_impairments(once, p)
    assert np.array_equal(once, twice)


def test_quantizer_error_bounded_by_step():
    rng = RNG(8)
    x = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
    q = quantize_midrise(x, 10)
    rms = np.sqrt(np.mean(np.abs(x) ** 2))
    step = 2 * (4.0 * 2 ** np.round(np.log2(rms))) / 2**10
    inside = np.abs(x.real) < 4 * rms
    assert np.all(np.abs(q.real - x.real)[inside] <= step / 2 + 1e-12)


def test_rx_profile_validation():
    with pytest.raises(ConfigError):
        ReceiverProfile(adc_bits=2)
    with pytest.raises(ConfigError):
        ReceiverProfile(lo_offset=0.7)


# ------------------------------------------------------------ equalizer


def test_equalize_identity_channel():
    s = gen_baseband(FrameSpec(256, 32), RNG(9))
    assert np.max(np.abs(equalize(s, np.array([1.0 + 0j])) - s)) < 1e-9


def test_equalize_scalar_channel():
    s = gen_baseband(FrameSpec(64, 8), RNG(10))
    assert np.max(np.abs(equalize(s, np.array([2.0 + 0j])) - s / 2)) < 1e-9


def test_equalize_round_trip_beyond_pilot_guard():
    spec = FrameSpec(256, 32)
    s = gen_baseband(spec, RNG(11))
    ch = ChannelRealization(taps=np.array([1.0, 0.3]), noise_sigma=0.0)
    eq = equalize(apply_channel(s, ch, RNG(0)), ch.taps)
    # linear-vs-circular mismatch lives in the first taps-1 samples; the
    # pilot guard hides it from scoring
    assert np.max(np.abs(eq[spec.pilot_len:] - s[spec.pilot_len:])) < 1e-6


# ---------------------------------------------------------------- frames


def test_to_iq_frame_definition():
    frame = to_iq_frame(np.array([1 + 2j]), length=1, normalize=False)
    assert frame.shape == (2, 1)
    assert np.allclose(frame, [[1.0], [2.0]])


def test_to_iq_frame_unit_rms():
    s = gen_baseband(FrameSpec(128, 16), RNG(12)) * 3.7
    frame = to_iq_frame(s, 128)
    assert abs(np.sqrt(np.mean(frame.astype(np.float64) ** 2)) - 1.0) < 1e-6


def test_to_iq_frame_zero_guard():
    frame = to_iq_frame(np.zeros(8, dtype=complex), 8)
    assert np.all(frame == 0)


def test_to_iq_frame_length_error():
    with pytest.raises(ShapeError):
        to_iq_frame(np.zeros(7, dtype=complex), 8)


# ------------------------------------------------------- whole pipeline


def test_null_impairment_chain_reproduces_baseband():
    spec = FrameSpec(256, 32)
    s = gen_baseband(spec, RNG(13))
    out = apply_tx_impairments(s, TransmitterProfile())
    ch = ChannelRealization(taps=np.array([1.0 + 0j]), noise_sigma=0.0)
    out = apply_channel(out, ch, RNG(0))
    out = apply_rx_impairments(out, ReceiverProfile())
    out = equalize(out, ch.taps)
    frame = to_iq_frame(out, spec.length)
    want = to_iq_frame(s, spec.length)
    assert np.max(np.abs(frame - want)) < 1e-6


def test_generate_enumeration_and_label_multiset():
    cfg = GeneratorConfig(k_tx=2, m_rx=2, samples_per_pair=1, seed=3,
                          frame=FrameSpec(64, 8))
    ds = generate_dataset(cfg)
    assert len(ds) == 4
    assert sorted(zip(ds.y.tolist(), ds.d.tolist())) == [(1, 1), (1, 2), (2, 1), (2, 2)]


def test_generate_label_balance():
    cfg = tiny_generator_config(k=3, m=2, n=5)
    ds = generate_dataset(cfg)
    pairs, counts = np.unique(np.stack([ds.y, ds.d], axis=1), axis=0, return_counts=True)
    assert len(pairs) == 6 and np.all(counts == 5)


def test_generate_deterministic():
    cfg = tiny_generator_config(n=4)
    a, b = generate_dataset(cfg), generate_dataset(cfg)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y) and np.array_equal(a.d, b.d)


def test_generate_manysig_shape():
    cfg = GeneratorConfig(k_tx=12, m_rx=6, samples_per_pair=1000, seed=1,
                          frame=FrameSpec(64, 8))
    ds = generate_dataset(cfg)
    assert len(ds) == 72_000


def test_generate_order_independent_substreams():
    cfg = tiny_generator_config(k=2, m=2, n=2)
    ds = generate_dataset(cfg)
    tx, rx = draw_profiles(cfg)
    from drift.util import STREAM_FRAME, substream

    # resynthesize one sample in isolation; must match the bulk run
    rng = substream(cfg.seed, STREAM_FRAME, cfg.day, 2, 1, 1)
    frame = synthesize_frame(cfg, tx[2], rx[1], rng)
    row = np.flatnonzero((ds.y == 2) & (ds.d == 1))[1]
    assert np.array_equal(ds.x[row], frame)


def test_day_tag_changes_channels_not_devices():
    cfg0 = tiny_generator_config(n=2)
    cfg1 = GeneratorConfig(**{**cfg0.__dict__, "day": 1})
    assert draw_profiles(cfg0)[0] == draw_profiles(cfg1)[0]  # same devices
    a, b = generate_dataset(cfg0), generate_dataset(cfg1)
    assert not np.array_equal(a.x, b.x)  # different channel draws


def test_invalid_generator_config():
    with pytest.raises(ConfigError):
        GeneratorConfig(k_tx=1, m_rx=2, samples_per_pair=1, seed=0)


# ----------------------------------------------------------------- split


def test_split_disjoint_and_covering(tiny_dataset):
    split = split_by_receivers(tiny_dataset, [1, 2], [3])
    assert split.train_receivers == (1, 2) and split.test_receivers == (3,)
    assert set(np.unique(split.train.d)) == {1, 2}
    assert set(np.unique(split.test.d)) == {3}
    assert not set(split.train.uid) & set(split.test.uid)


def test_split_rejects_overlap(tiny_dataset):
    with pytest.raises(ConfigError):
        split_by_receivers(tiny_dataset, [1, 2], [2, 3])


def test_split_rejects_unknown_receiver(tiny_dataset):
    with pytest.raises(ConfigError):
        split_by_receivers(tiny_dataset, [1], [9])


# -------------------------------------------------------------- file io


def test_dataset_round_trip(tmp_path, tiny_dataset):
    path = tmp_path / "ds.bin"
    cfg = tiny_generator_config()
    save_dataset(path, tiny_dataset, cfg.to_dict())
    back = load_dataset(path)
    assert np.array_equal(back.x, tiny_dataset.x)
    assert np.array_equal(back.y, tiny_dataset.y)
    assert np.array_equal(back.d, tiny_dataset.d)
    assert back.k_tx == tiny_dataset.k_tx and back.m_rx == tiny_dataset.m_rx
    side = load_sidecar(path)
    assert side["k_tx"] == cfg.k_tx and side["seed"] == cfg.seed


def test_dataset_truncation_rejected(tmp_path, tiny_dataset):
    path = tmp_path / "ds.bin"
    save_dataset(path, tiny_dataset, {})
    blob = path.read_bytes()
    bad = tmp_path / "bad.bin"
    bad.write_bytes(blob[:-10])
    with pytest.raises(FormatError):
        load_dataset(bad)


def test_dataset_bad_magic(tmp_path):
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"WRONGMAG" + b"\x00" * 40)
    with pytest.raises(FormatError):
        load_dataset(bad)


# --------------------------------------------- raw-frame separability


def test_strong_transmitters_linearly_separable_on_one_receiver():
    from drift.evalkit import fit_linear_probe

    cfg = GeneratorConfig(
        k_tx=2, m_rx=2, samples_per_pair=120, seed=21,
        frame=FrameSpec(128, 16), tx_ranges=STRONG, rx_ranges=STRONG,
        channel=ChannelLaw(max_taps=2, snr_db=25.0),
    )
    ds = generate_dataset(cfg)
    one_rx = ds.subset(ds.d == 1)
    feats = one_rx.x.reshape(len(one_rx), -1)
    acc = fit_linear_probe(feats, one_rx.y.astype(np.int64) - 1, 2, seed=0)
    assert acc > 0.9
