"""Low- and high-frequency generators, their discriminators, and the GAN losses.

Network fields live in truncated-normalized units ``clamp(f / tau, -1, 1)``
so that a tanh head can cover them; :func:`to_network` and
:func:`from_network` convert.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .nn import BatchNorm, Conv3d, ConvTranspose3d, Linear, Module, Tensor
from .nn import tensor as T
from .nn.checkpoint import load_checkpoint, save_checkpoint

LRELU_SLOPE = 0.2
PROB_EPS = 1e-7
DEFAULT_TAU = 0.2


def to_network(values: np.ndarray, tau: float = DEFAULT_TAU) -> np.ndarray:
    return np.clip(np.asarray(values, dtype=np.float64) / tau, -1.0, 1.0)


def from_network(values: np.ndarray, tau: float = DEFAULT_TAU) -> np.ndarray:
    # exact inverse wherever the clamp was inactive; the zero level set is preserved everywhere
    return np.asarray(values, dtype=np.float64) * tau


@dataclass(frozen=True)
class LfgConfig:
    latent_dim: int = 200
    base_resolution: int = 4
    base_channels: int = 512
    n_upconv_layers: int = 4

    def __post_init__(self):
        if self.latent_dim < 1 or self.base_resolution < 1 or self.n_upconv_layers < 1:
            raise ValueError(f"inconsistent LFG config {self}")
        if self.base_channels >> (self.n_upconv_layers - 1) < 1:
            raise ValueError("too few base channels for the number of layers")

    @classmethod
    def desk(cls) -> "LfgConfig":
        return cls(latent_dim=64, base_resolution=2, base_channels=64, n_upconv_layers=3)

    @property
    def output_resolution(self) -> int:
        return self.base_resolution * 2 ** self.n_upconv_layers

    def channels(self) -> list[int]:
        """Channel count entering each up-convolution, then the single output channel."""
        return [self.base_channels >> i for i in range(self.n_upconv_layers)] + [1]


@dataclass(frozen=True)
class HfgConfig:
    resolution: int = 16
    encoder_channels: tuple = (16, 32, 64)
    patch_layers: int = 1
    patch_channels: int = 16
    l1_weight: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "encoder_channels", tuple(self.encoder_channels))
        if self.resolution % 2 ** len(self.encoder_channels):
            raise ValueError("resolution must be divisible by 2**depth")
        if self.resolution % 2 ** self.patch_layers:
            raise ValueError("resolution must be divisible by 2**patch_layers")

    @classmethod
    def for_resolution(cls, n: int) -> "HfgConfig":
        """Patch receptive field close to a quarter of the volume side."""
        return cls(resolution=n, patch_layers=max(1, round(math.log2(n / 8))))

    @property
    def patch_receptive_field(self) -> int:
        return 2 ** (self.patch_layers + 1) - 1


class LowFrequencyGenerator(Module):
    """latent -> linear -> reshape -> [upconv, batchnorm, relu] x (L-1) -> upconv -> tanh."""

    def __init__(self, config: LfgConfig, rng: np.random.Generator):
        self.config = config
        ch = config.channels()
        b = config.base_resolution
        self.project = Linear(config.latent_dim, ch[0] * b ** 3, rng)
        self.ups = [ConvTranspose3d(ch[i], ch[i + 1], rng) for i in range(config.n_upconv_layers)]
        self.norms = [BatchNorm(ch[i + 1]) for i in range(config.n_upconv_layers - 1)]

    def forward(self, z: Tensor) -> Tensor:
        c = self.config
        if z.data.ndim == 1:
            z = T.reshape(z, (1, -1))
        if z.shape[1] != c.latent_dim:
            raise ValueError(f"latent has {z.shape[1]} dims, config expects {c.latent_dim}")
        b = c.base_resolution
        x = T.reshape(self.project(z), (z.shape[0], c.channels()[0], b, b, b))
        for up, norm in zip(self.ups[:-1], self.norms):
            x = T.relu(norm(up(x)))
        x = T.tanh(self.ups[-1](x))
        return T.reshape(x, (x.shape[0],) + x.shape[2:])


class VolumeDiscriminator(Module):
    """Mirror of the generator: strided convs down to the base lattice, then linear -> sigmoid."""

    def __init__(self, config: LfgConfig, rng: np.random.Generator):
        self.config = config
        ch = config.channels()[::-1]  # 1, smallest ... base_channels
        self.convs = [Conv3d(ch[i], ch[i + 1], 5, rng, stride=2, padding=2) for i in range(config.n_upconv_layers)]
        self.norms = [BatchNorm(ch[i + 1]) for i in range(1, config.n_upconv_layers)]
        self.head = Linear(ch[-1] * config.base_resolution ** 3, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim == 4:
            x = T.reshape(x, (x.shape[0], 1) + x.shape[1:])
        x = T.leaky_relu(self.convs[0](x), LRELU_SLOPE)
        for conv, norm in zip(self.convs[1:], self.norms):
            x = T.leaky_relu(norm(conv(x)), LRELU_SLOPE)
        x = T.reshape(x, (x.shape[0], -1))
        return T.sigmoid(self.head(x))


class HighFrequencyGenerator(Module):
    """Encoder-decoder translating a low band into its high band.

    Encoder: strided conv then leaky ReLU (batch norm from the second level).
    Decoder: ReLU then up-convolution, batch norm, and concatenation with the
    encoder features of the same resolution.
    """

    def __init__(self, config: HfgConfig, rng: np.random.Generator):
        self.config = config
        ch = (1,) + config.encoder_channels
        depth = len(config.encoder_channels)
        self.encoder = [Conv3d(ch[i], ch[i + 1], 5, rng, stride=2, padding=2) for i in range(depth)]
        self.enc_norms = [BatchNorm(ch[i + 1]) for i in range(1, depth)]
        dec = []
        dec_norms = []
        c_in = ch[depth]
        for level in range(depth - 1, 0, -1):
            dec.append(ConvTranspose3d(c_in, ch[level], rng))
            dec_norms.append(BatchNorm(ch[level]))
            c_in = 2 * ch[level]
        dec.append(ConvTranspose3d(c_in, 1, rng))
        self.decoder = dec
        self.dec_norms = dec_norms

    def decoder_modules(self) -> list[Module]:
        return self.decoder + self.dec_norms

    def forward(self, x: Tensor, use_skips: bool = True) -> Tensor:
        n = self.config.resolution
        if x.data.ndim == 4:
            x = T.reshape(x, (x.shape[0], 1) + x.shape[1:])
        if x.shape[2:] != (n, n, n):
            raise ValueError(f"HFG expects {n}^3 input, got {x.shape[2:]}")
        feats = []
        h = T.leaky_relu(self.encoder[0](x), LRELU_SLOPE)
        feats.append(h)
        for conv, norm in zip(self.encoder[1:], self.enc_norms):
            h = T.leaky_relu(norm(conv(h)), LRELU_SLOPE)
            feats.append(h)
        for i, (up, norm) in enumerate(zip(self.decoder[:-1], self.dec_norms)):
            h = norm(up(T.relu(h)))
            skip = feats[-2 - i]
            h = T.concat([h, skip if use_skips else Tensor(np.zeros(skip.shape))], axis=1)
        h = T.tanh(self.decoder[-1](T.relu(h)))
        return T.reshape(h, (h.shape[0],) + h.shape[2:])


class PatchDiscriminator(Module):
    """Fully convolutional discriminator over (low, high) pairs; one probability per patch."""

    def __init__(self, config: HfgConfig, rng: np.random.Generator):
        self.config = config
        c = config.patch_channels
        chans = [2] + [c * 2 ** i for i in range(config.patch_layers)]
        self.convs = [Conv3d(chans[i], chans[i + 1], 3, rng, stride=2, padding=1)
                      for i in range(config.patch_layers)]
        self.norms = [BatchNorm(chans[i + 1]) for i in range(1, config.patch_layers)]
        self.head = Conv3d(chans[-1], 1, 1, rng)

    def forward(self, low: Tensor, high: Tensor) -> Tensor:
        x = T.concat([_channels_first(low), _channels_first(high)], axis=1)
        x = T.leaky_relu(self.convs[0](x), LRELU_SLOPE)
        for conv, norm in zip(self.convs[1:], self.norms):
            x = T.leaky_relu(norm(conv(x)), LRELU_SLOPE)
        return T.sigmoid(self.head(x))


def _channels_first(x: Tensor) -> Tensor:
    return T.reshape(x, (x.shape[0], 1) + x.shape[1:]) if x.data.ndim == 4 else x


# losses

def _check_prob(d: Tensor, name: str) -> Tensor:
    if not np.all(np.isfinite(d.data)) or d.data.min() < 0.0 or d.data.max() > 1.0:
        raise ValueError(f"{name} must hold probabilities in [0, 1]")
    return T.clip(d, PROB_EPS, 1.0 - PROB_EPS)


def discriminator_loss(d_real: Tensor, d_fake: Tensor) -> Tensor:
    """-[log D(x) + log(1 - D(G(z)))], averaged over samples and patches."""
    dr = _check_prob(_as_t(d_real), "d_real")
    df = _check_prob(_as_t(d_fake), "d_fake")
    return -(T.mean(T.log(dr)) + T.mean(T.log(1.0 - df)))


def generator_adversarial_loss(d_fake: Tensor) -> Tensor:
    """Non-saturating form -log D(G(z))."""
    return -T.mean(T.log(_check_prob(_as_t(d_fake), "d_fake")))


def lfg_gan_loss(d_real, d_fake) -> tuple[Tensor, Tensor]:
    return discriminator_loss(d_real, d_fake), generator_adversarial_loss(d_fake)


def l1_term(x_hf, g_out) -> Tensor:
    return T.mean(T.abs_(_as_t(x_hf) - _as_t(g_out)))


def hfg_loss(d_pair_real, d_pair_fake, x_hf, g_out, l1_weight: float = 100.0) -> tuple[Tensor, Tensor]:
    if np.shape(_as_t(x_hf).data) != np.shape(_as_t(g_out).data):
        raise ValueError("x_hf and g_out shapes differ")
    loss_d = discriminator_loss(d_pair_real, d_pair_fake)
    loss_g = generator_adversarial_loss(d_pair_fake) + l1_weight * l1_term(x_hf, g_out)
    return loss_d, loss_g


def _as_t(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# checkpoints

@dataclass
class ModelCheckpoint:
    """Generator + discriminator pair with the metadata needed to use them."""

    kind: str
    config: object
    generator: Module
    discriminator: Module
    meta: dict = field(default_factory=dict)

    @property
    def resolution(self) -> int:
        c = self.config
        return c.output_resolution if isinstance(c, LfgConfig) else c.resolution

    def save(self, path) -> None:
        header = {"kind": self.kind, "config": asdict(self.config), "meta": self.meta}
        arrays = [("generator." + n, a) for n, a in self.generator.state()]
        arrays += [("discriminator." + n, a) for n, a in self.discriminator.state()]
        save_checkpoint(path, header, arrays)

    @classmethod
    def load(cls, path) -> "ModelCheckpoint":
        header, arrays = load_checkpoint(path)
        ckpt = build_models(header["kind"], header["config"], seed=0)
        ckpt.meta = header.get("meta", {})
        for prefix, module in (("generator.", ckpt.generator), ("discriminator.", ckpt.discriminator)):
            module.load_state({k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)})
        return ckpt


def build_models(kind: str, config, seed: int = 0, meta: Optional[dict] = None) -> ModelCheckpoint:
    rng = np.random.default_rng(seed)
    if kind == "lfg":
        cfg = config if isinstance(config, LfgConfig) else LfgConfig(**config)
        return ModelCheckpoint(kind, cfg, LowFrequencyGenerator(cfg, rng), VolumeDiscriminator(cfg, rng), meta or {})
    if kind == "hfg":
        cfg = config if isinstance(config, HfgConfig) else HfgConfig(**config)
        return ModelCheckpoint(kind, cfg, HighFrequencyGenerator(cfg, rng), PatchDiscriminator(cfg, rng), meta or {})
    raise ValueError(f"unknown model kind {kind!r}")
