"""Forward-only toy U-Net that hosts the decoder refinement hook.

Encoder level l: 3x3 conv (reflect padding) -> ReLU -> 2x2 mean-pool, keeping the
pre-pool activation as skip h_l. The bottleneck receives the scalar time bias t.
Decoder block k (k = 0 at the bottleneck) upsamples the backbone 2x, runs the hook
on (x, h_{L-1-k}), concatenates [x', h'] along channels and applies 3x3 conv -> ReLU.
A final 1x1 conv maps back to the input channels.
"""

import hashlib
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from mel_refine.core.tensor import FeatureMap
from mel_refine.models.rng import GaussianStream
from mel_refine.refine.hook import BlockHook, RefineHook
from mel_refine.refine.params import RefineParams
from mel_refine.utils.exceptions import ValidationError
from mel_refine.utils.logger import Logger

logger = Logger.get_logger(__name__)


@dataclass(frozen=True)
class UNetConfig:
    """Toy U-Net structure and weight seed."""

    levels: int = 3
    base_channels: int = 8
    in_channels: int = 1
    spatial: Tuple[int, int] = (32, 32)
    seed: int = 0
    activation: str = "relu"

    def __post_init__(self):
        if self.levels < 2:
            raise ValidationError(f"levels must be >= 2 for two hook sites, got {self.levels}")
        if self.base_channels < 1 or self.in_channels < 1:
            raise ValidationError("channel counts must be >= 1")
        if self.activation != "relu":
            raise ValidationError(f"unsupported activation {self.activation!r}")
        factor = 2 ** self.levels
        height, width = self.spatial
        if height % factor or width % factor or height < factor or width < factor:
            raise ValidationError(
                f"spatial {height}x{width} must be divisible by 2**levels = {factor}"
            )

    def channels(self, level: int) -> int:
        return self.base_channels * 2 ** level


@dataclass(frozen=True)
class Conv:
    """Conv weights (out, in, k, k) plus bias (out,)."""

    weight: np.ndarray
    bias: np.ndarray


@dataclass
class BlockCapture:
    """Decoder block features before (x, h) and after (xr, hr) the hook."""

    block_index: int
    x: FeatureMap
    h: FeatureMap
    xr: FeatureMap
    hr: FeatureMap


@dataclass
class ToyUNet:
    cfg: UNetConfig
    encoder: List[Conv] = field(default_factory=list)
    decoder: List[Conv] = field(default_factory=list)
    head: Optional[Conv] = None

    @property
    def hook_sites(self) -> int:
        return len(self.decoder)

    def layers(self) -> List[Conv]:
        return [*self.encoder, *self.decoder, self.head]

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for layer in self.layers():
            digest.update(layer.weight.astype("<f4").tobytes())
            digest.update(layer.bias.astype("<f4").tobytes())
        return digest.hexdigest()


def _make_conv(stream: GaussianStream, c_out: int, c_in: int, kernel: int) -> Conv:
    fan_in = c_in * kernel * kernel
    weight = stream.normal((c_out, c_in, kernel, kernel), std=1.0 / np.sqrt(fan_in))
    weight = weight.astype(np.float32)
    weight.flags.writeable = False
    bias = np.zeros(c_out, dtype=np.float32)
    bias.flags.writeable = False
    return Conv(weight=weight, bias=bias)


def build_unet(cfg: UNetConfig) -> ToyUNet:
    """Draw weights in fixed layer order: encoder, decoder (from bottleneck), head."""
    stream = GaussianStream(cfg.seed)
    net = ToyUNet(cfg=cfg)
    c_prev = cfg.in_channels
    for level in range(cfg.levels):
        c_level = cfg.channels(level)
        net.encoder.append(_make_conv(stream, c_level, c_prev, 3))
        c_prev = c_level
    for block in range(cfg.levels):
        level = cfg.levels - 1 - block
        c_skip = cfg.channels(level)
        net.decoder.append(_make_conv(stream, c_skip, c_prev + c_skip, 3))
        c_prev = c_skip
    net.head = _make_conv(stream, cfg.in_channels, c_prev, 1)
    logger.debug(f"Built toy U-Net levels={cfg.levels} seed={cfg.seed} checksum={net.checksum()[:12]}")
    return net


def conv2d(x: np.ndarray, conv: Conv) -> np.ndarray:
    """'Same' convolution with reflect padding over float64 arrays."""
    kernel = conv.weight.shape[-1]
    pad = kernel // 2
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), mode="reflect")
    windows = sliding_window_view(x, (kernel, kernel), axis=(2, 3))
    out = np.einsum("bchwij,ocij->bohw", windows, conv.weight.astype(np.float64))
    return out + conv.bias.astype(np.float64)[None, :, None, None]


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def mean_pool(x: np.ndarray) -> np.ndarray:
    b, c, h, w = x.shape
    return x.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def upsample_nearest(x: np.ndarray) -> np.ndarray:
    return x.repeat(2, axis=2).repeat(2, axis=3)


def as_hook(params: Union[RefineParams, BlockHook, None]) -> Optional[BlockHook]:
    if params is None:
        return None
    if isinstance(params, RefineParams):
        return RefineHook(params)
    return params


def forward(
    net: ToyUNet,
    x: FeatureMap,
    t: float,
    params: Union[RefineParams, BlockHook, None] = None,
    capture: Optional[List[BlockCapture]] = None,
) -> FeatureMap:
    """Noise prediction for x at time t, with the hook applied in every decoder block."""
    cfg = net.cfg
    expected = (cfg.in_channels, *cfg.spatial)
    if x.dims[1:] != expected:
        raise ValidationError(f"input dims {x.dims[1:]} do not match network {expected}")
    if not 0.0 <= t <= 1.0:
        raise ValidationError(f"t must lie in [0, 1], got {t}")
    hook = as_hook(params)

    feats = x.data.astype(np.float64)
    skips: List[FeatureMap] = []
    for conv in net.encoder:
        feats = relu(conv2d(feats, conv))
        skips.append(FeatureMap(feats))
        feats = mean_pool(feats)
    feats = feats + t

    for block, conv in enumerate(net.decoder):
        backbone = FeatureMap(upsample_nearest(feats))
        skip = skips[cfg.levels - 1 - block]
        refined_x, refined_h = hook(block, backbone, skip) if hook is not None else (backbone, skip)
        if capture is not None:
            capture.append(BlockCapture(block, backbone, skip, refined_x, refined_h))
        merged = np.concatenate([refined_x.data, refined_h.data], axis=1).astype(np.float64)
        feats = relu(conv2d(merged, conv))

    return FeatureMap(conv2d(feats, net.head))
