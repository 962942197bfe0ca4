"""Model definitions: shared 1-D residual encoder, dimension-wise feature
split, transmitter/receiver classifier heads, and the domain discriminator.

Two encoder presets exist. `desk` is a four-block residual net (widths
16/32/64/128, embedding 128) sized so CPU training finishes in minutes;
`paper` mirrors a 1-D ResNet-18 (two blocks per stage, widths 64..512,
embedding 512) for fidelity runs. Weights are Kaiming-uniform from a seeded
stream in registration order; biases start at zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .numerics import tensor as ops
from .numerics.tensor import Parameter, Tensor
from .util import STREAM_INIT, substream

PRESETS = {
    "desk": {"stage_widths": (16, 32, 64, 128), "blocks_per_stage": 1, "embedding_dim": 128},
    "paper": {"stage_widths": (64, 128, 256, 512), "blocks_per_stage": 2, "embedding_dim": 512},
}

METHODS = ("drift", "erm", "mtl", "dann")


@dataclass(frozen=True)
class ModelConfig:
    n_tx: int
    n_domains: int
    preset: str = "desk"
    method: str = "drift"
    input_len: int = 256
    in_channels: int = 2

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.embedding_dim % 2:
            raise ConfigError("embedding_dim must be even")

    @property
    def embedding_dim(self) -> int:
        return PRESETS[self.preset]["embedding_dim"]

    @property
    def uses_split(self) -> bool:
        return self.method in ("drift", "mtl")

    @property
    def has_rx_head(self) -> bool:
        return self.method in ("drift", "mtl")

    @property
    def has_discriminator(self) -> bool:
        return self.method in ("drift", "dann")

    def to_manifest(self) -> dict:
        return {
            "n_tx": self.n_tx, "n_domains": self.n_domains, "preset": self.preset,
            "method": self.method, "input_len": self.input_len,
            "in_channels": self.in_channels, "embedding_dim": self.embedding_dim,
        }

    @staticmethod
    def from_manifest(m: dict) -> "ModelConfig":
        return ModelConfig(n_tx=m["n_tx"], n_domains=m["n_domains"], preset=m["preset"],
                           method=m["method"], input_len=m["input_len"],
                           in_channels=m["in_channels"])


def _kaiming_uniform(rng, shape, fan_in, dtype):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class _Registry:
    """Collects parameters and batchnorm buffers in registration order."""

    def __init__(self, rng, dtype):
        self.rng = rng
        self.dtype = dtype
        self.params: dict[str, Parameter] = {}
        self.bn_states: dict[str, "BNState"] = {}

    def parameter(self, name, shape, fan_in=None):
        if name in self.params:
            raise ConfigError(f"duplicate parameter name {name}")
        if fan_in is None:
            data = np.zeros(shape, dtype=self.dtype)
        else:
            data = _kaiming_uniform(self.rng, shape, fan_in, self.dtype)
        p = Parameter(name, data)
        self.params[name] = p
        return p


class BNState:
    """Running statistics buffer; momentum 0.1, variance floor 1e-5."""

    momentum = 0.1
    eps = 1e-5

    def __init__(self, channels, dtype):
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)

    def update(self, mean, var, n):
        m = self.running_mean.dtype.type(self.momentum)
        unbiased = var * (n / (n - 1))
        self.running_mean = (1 - m) * self.running_mean + m * mean.astype(self.running_mean.dtype)
        self.running_var = (1 - m) * self.running_var + m * unbiased.astype(self.running_var.dtype)


class Conv1d:
    def __init__(self, reg, name, c_in, c_out, k, stride=1, pad=0):
        self.stride, self.pad = stride, pad
        self.w = reg.parameter(f"{name}.w", (c_out, c_in, k), fan_in=c_in * k)
        self.b = reg.parameter(f"{name}.b", (c_out,))

    def __call__(self, x):
        return ops.conv1d(x, self.w, self.b, self.stride, self.pad)


class BatchNorm1d:
    def __init__(self, reg, name, channels):
        self.gamma = reg.parameter(f"{name}.gamma", (channels,))
        self.gamma.data = np.ones(channels, dtype=reg.dtype)
        self.beta = reg.parameter(f"{name}.beta", (channels,))
        self.state = BNState(channels, reg.dtype)
        reg.bn_states[name] = self.state

    def __call__(self, x, train):
        return ops.batchnorm1d(x, self.gamma, self.beta, self.state, train)


class Dense:
    def __init__(self, reg, name, n_in, n_out):
        self.w = reg.parameter(f"{name}.w", (n_out, n_in), fan_in=n_in)
        self.b = reg.parameter(f"{name}.b", (n_out,))

    def __call__(self, x):
        return ops.dense(x, self.w, self.b)


class ResidualBlock:
    def __init__(self, reg, name, c_in, c_out, stride):
        self.conv1 = Conv1d(reg, f"{name}.conv1", c_in, c_out, 3, stride=stride, pad=1)
        self.bn1 = BatchNorm1d(reg, f"{name}.bn1", c_out)
        self.conv2 = Conv1d(reg, f"{name}.conv2", c_out, c_out, 3, stride=1, pad=1)
        self.bn2 = BatchNorm1d(reg, f"{name}.bn2", c_out)
        self.downsample = None
        if stride != 1 or c_in != c_out:
            self.downsample = (
                Conv1d(reg, f"{name}.ds", c_in, c_out, 1, stride=stride, pad=0),
                BatchNorm1d(reg, f"{name}.ds_bn", c_out),
            )

    def __call__(self, x, train):
        out = ops.relu(self.bn1(self.conv1(x), train))
        out = self.bn2(self.conv2(out), train)
        if self.downsample is not None:
            conv, bn = self.downsample
            x = bn(conv(x), train)
        return ops.relu(ops.add(out, x))


class Encoder:
    """Stem conv(k=7, s=2) -> maxpool(k=3, s=2) -> residual stages -> global
    average pool. Output width equals the preset embedding dim."""

    def __init__(self, reg, cfg: ModelConfig):
        spec = PRESETS[cfg.preset]
        widths = spec["stage_widths"]
        self.stem = Conv1d(reg, "encoder.stem", cfg.in_channels, widths[0], 7, stride=2, pad=3)
        self.stem_bn = BatchNorm1d(reg, "encoder.stem_bn", widths[0])
        self.blocks = []
        c_in = widths[0]
        for si, width in enumerate(widths):
            for bi in range(spec["blocks_per_stage"]):
                stride = 2 if (si > 0 and bi == 0) else 1
                self.blocks.append(
                    ResidualBlock(reg, f"encoder.s{si}b{bi}", c_in, width, stride)
                )
                c_in = width

    def __call__(self, x, train):
        h = ops.relu(self.stem_bn(self.stem(x), train))
        h = ops.max_pool1d(h, 3, 2, pad=1)
        for block in self.blocks:
            h = block(h, train)
        return ops.global_avg_pool(h)


class MLPHead:
    """Three dense layers narrowing through E/2 and E/4 hidden widths."""

    def __init__(self, reg, name, n_in, embedding_dim, n_out):
        h1, h2 = embedding_dim // 2, embedding_dim // 4
        self.l1 = Dense(reg, f"{name}.l1", n_in, h1)
        self.l2 = Dense(reg, f"{name}.l2", h1, h2)
        self.l3 = Dense(reg, f"{name}.l3", h2, n_out)

    def __call__(self, x):
        return self.l3(ops.relu(self.l2(ops.relu(self.l1(x)))))


class Discriminator:
    """Two dense layers (hidden E/4) over the gradient-reversed features."""

    def __init__(self, reg, name, n_in, embedding_dim, n_out):
        self.l1 = Dense(reg, f"{name}.l1", n_in, embedding_dim // 4)
        self.l2 = Dense(reg, f"{name}.l2", embedding_dim // 4, n_out)

    def __call__(self, x, lam):
        return self.l2(ops.relu(self.l1(ops.grl(x, lam))))


def split_features(z: Tensor):
    """First half of the embedding is transmitter-specific, second half
    receiver-specific; gradients route only into their own slice."""
    e = z.shape[1]
    if e % 2:
        raise ConfigError(f"embedding width {e} is odd; cannot split")
    return ops.slice_cols(z, 0, e // 2), ops.slice_cols(z, e // 2, e)


class DriftModel:
    """Encoder plus the heads the chosen method needs.

    Registration order is encoder, tx head, rx head, discriminator, so
    methods sharing a prefix of that list get bit-identical initializations
    from the same seed.
    """

    def __init__(self, cfg: ModelConfig, seed: int, dtype=np.float32):
        self.cfg = cfg
        reg = _Registry(substream(seed, STREAM_INIT), np.dtype(dtype))
        self.encoder = Encoder(reg, cfg)
        e = cfg.embedding_dim
        feat = e // 2 if cfg.uses_split else e
        self.tx_head = MLPHead(reg, "tx_head", feat, e, cfg.n_tx)
        self.rx_head = MLPHead(reg, "rx_head", feat, e, cfg.n_domains) if cfg.has_rx_head else None
        self.discriminator = (
            Discriminator(reg, "disc", feat, e, cfg.n_domains) if cfg.has_discriminator else None
        )
        self._params = reg.params
        self._bn_states = reg.bn_states

    # -- forward -----------------------------------------------------------

    def encode(self, x: Tensor, train: bool = False) -> Tensor:
        if x.data.ndim != 3 or x.shape[1:] != (self.cfg.in_channels, self.cfg.input_len):
            raise ShapeError(
                f"input {x.shape} != (B, {self.cfg.in_channels}, {self.cfg.input_len})"
            )
        return self.encoder(x, train)

    def forward(self, x: Tensor, train: bool = False, grl_lambda: float = 1.0) -> dict:
        """Full forward pass; returns embeddings, the split halves, and all
        head logits the method defines (missing heads map to None)."""
        z = self.encode(x, train)
        out = {"z": z, "z_star": None, "z_prime": None,
               "tx_logits": None, "rx_logits": None, "dom_logits": None}
        if self.cfg.uses_split:
            z_star, z_prime = split_features(z)
            out["z_star"], out["z_prime"] = z_star, z_prime
        else:
            z_star = z_prime = z
        out["tx_logits"] = self.tx_head(z_star)
        if self.rx_head is not None:
            out["rx_logits"] = self.rx_head(z_prime)
        if self.discriminator is not None:
            out["dom_logits"] = self.discriminator(z_star, grl_lambda)
        return out

    # -- state -------------------------------------------------------------

    def params(self) -> dict[str, Parameter]:
        return self._params

    def buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for name, st in self._bn_states.items():
            out[f"{name}.running_mean"] = st.running_mean
            out[f"{name}.running_var"] = st.running_var
        return out

    def load_state(self, params: dict[str, np.ndarray], buffers: dict[str, np.ndarray]) -> None:
        if set(params) != set(self._params):
            raise ShapeError("parameter set mismatch when loading state")
        for name, arr in params.items():
            if arr.shape != self._params[name].data.shape:
                raise ShapeError(f"shape mismatch for {name}")
            self._params[name].data = np.array(arr, copy=True)
        for name, st in self._bn_states.items():
            st.running_mean = np.array(buffers[f"{name}.running_mean"], copy=True)
            st.running_var = np.array(buffers[f"{name}.running_var"], copy=True)


def predict(logits) -> np.ndarray:
    """Argmax class per row; ties break to the lowest index."""
    arr = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    if not np.all(np.isfinite(arr)):
        raise ShapeError("predict requires finite logits")
    return arr.argmax(axis=1)
