"""Decoder-block refinement: skip amplification and two-stage backbone adjustment."""

from dataclasses import dataclass
from typing import Callable, Literal, Tuple

import numpy as np

from mel_refine.core.tensor import FeatureMap
from mel_refine.refine.bands import central_region_mask, fourier_band_scale
from mel_refine.refine.params import RefineParams
from mel_refine.utils.exceptions import ValidationError
from mel_refine.utils.logger import Logger
from mel_refine.utils.validators import TensorValidator

logger = Logger.get_logger(__name__)

# Blocks counted from the bottleneck outward; only these are modified.
REFINED_BLOCKS = (0, 1)

BlockHook = Callable[[int, FeatureMap, FeatureMap], Tuple[FeatureMap, FeatureMap]]


def structure_alpha(x: FeatureMap, m: float, eps: float = 1e-8) -> np.ndarray:
    """Per-batch (B, H, W) scaling map in [1, m] from the normalized channel mean."""
    TensorValidator.validate_gain("m", m, minimum=1.0, inclusive=True)
    mean = x.data.astype(np.float64).mean(axis=1)
    lo = mean.min(axis=(1, 2), keepdims=True)
    hi = mean.max(axis=(1, 2), keepdims=True)
    spread = hi - lo
    degenerate = spread < eps
    safe = np.where(degenerate, 1.0, spread)
    alpha = (m - 1.0) * (mean - lo) / safe + 1.0
    return np.where(degenerate, 1.0, alpha)


def structure_scale(x: FeatureMap, m: float, eps: float = 1e-8, channels: str = "all") -> FeatureMap:
    alpha = structure_alpha(x, m, eps)
    data = x.data.astype(np.float64)
    if channels == "all":
        data = data * alpha[:, None, :, :]
    elif channels == "half":
        half = x.dims[1] // 2
        data[:, :half] = data[:, :half] * alpha[:, None, :, :]
    else:
        raise ValidationError(f"structure channels must be 'all' or 'half', got {channels!r}")
    return FeatureMap(data)


def refine_skip(h: FeatureMap, s: float) -> FeatureMap:
    TensorValidator.validate_gain("s", s)
    height, width = h.spatial
    return fourier_band_scale(h, central_region_mask(height, width, 1.0, s))


def refine_backbone(x: FeatureMap, m: float, b: float, eps: float = 1e-8, channels: str = "all") -> FeatureMap:
    """Structure-aware scaling by m, then HF suppression by b."""
    TensorValidator.validate_gain("b", b)
    scaled = structure_scale(x, m, eps, channels)
    height, width = x.spatial
    return fourier_band_scale(scaled, central_region_mask(height, width, 1.0, b))


def apply_block(params: RefineParams, block_index: int, x: FeatureMap, h: FeatureMap) -> Tuple[FeatureMap, FeatureMap]:
    """Refine one decoder block's (backbone, skip) pair.

    Unity gains skip their transforms entirely, so identity parameters and blocks
    past the first two return the inputs untouched.
    """
    if block_index < 0:
        raise ValidationError(f"block_index must be >= 0, got {block_index}")
    if block_index not in REFINED_BLOCKS or params.is_identity:
        return x, h
    TensorValidator.validate_spatial(*x.spatial, 2, "backbone")
    TensorValidator.validate_spatial(*h.spatial, 2, "skip")

    s = params.skip_gain(block_index)
    b = params.backbone_gain(block_index)
    x_out = x
    if params.m != 1.0:
        x_out = structure_scale(x_out, params.m, params.eps, params.structure_channels)
    if b != 1.0:
        height, width = x_out.spatial
        x_out = fourier_band_scale(x_out, central_region_mask(height, width, 1.0, b))
    h_out = refine_skip(h, s) if s != 1.0 else h
    logger.debug(f"Refined block {block_index}: s={s} b={b} m={params.m}")
    return x_out, h_out


@dataclass(frozen=True)
class RefineHook:
    """Callable adapter binding RefineParams to the decoder hook signature."""

    params: RefineParams

    def __call__(self, block_index: int, x: FeatureMap, h: FeatureMap) -> Tuple[FeatureMap, FeatureMap]:
        return apply_block(self.params, block_index, x, h)

    @property
    def label(self) -> str:
        return self.params.to_kv()


@dataclass(frozen=True)
class ComponentEdit:
    """Scale one band of one feature stream, used by the component-impact study."""

    target: Literal["skip", "backbone"]
    band: Literal["hf", "lf"]
    gain: float
    blocks: Tuple[int, ...] = REFINED_BLOCKS

    def __post_init__(self):
        if self.target not in ("skip", "backbone"):
            raise ValidationError(f"target must be 'skip' or 'backbone', got {self.target!r}")
        if self.band not in ("hf", "lf"):
            raise ValidationError(f"band must be 'hf' or 'lf', got {self.band!r}")
        TensorValidator.validate_gain("gain", self.gain)

    @property
    def label(self) -> str:
        verb = "amplify" if self.gain > 1 else "attenuate"
        return f"{verb}-{self.target}-{self.band}"

    def _scale(self, f: FeatureMap) -> FeatureMap:
        height, width = f.spatial
        lf, hf = (1.0, self.gain) if self.band == "hf" else (self.gain, 1.0)
        return fourier_band_scale(f, central_region_mask(height, width, lf, hf))

    def __call__(self, block_index: int, x: FeatureMap, h: FeatureMap) -> Tuple[FeatureMap, FeatureMap]:
        if block_index not in self.blocks or self.gain == 1.0:
            return x, h
        if self.target == "skip":
            return x, self._scale(h)
        return self._scale(x), h
