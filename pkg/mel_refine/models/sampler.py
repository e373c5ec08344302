"""Deterministic DDIM sampling with the toy U-Net as noise predictor."""

from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from mel_refine.core.tensor import FeatureMap
from mel_refine.models.rng import GaussianStream
from mel_refine.models.unet_toy import BlockCapture, ToyUNet, forward
from mel_refine.refine.hook import BlockHook
from mel_refine.refine.params import RefineParams
from mel_refine.utils.exceptions import ValidationError
from mel_refine.utils.logger import Logger

logger = Logger.get_logger(__name__)


@dataclass(frozen=True)
class SamplerConfig:
    """Step count, cumulative-alpha endpoints and noise seed."""

    steps: int = 25
    alpha_bar_start: float = 0.9999  # cleanest level, reached at the end
    alpha_bar_end: float = 0.02  # noisiest level, where sampling starts
    seed: int = 0
    batch: int = 1

    def __post_init__(self):
        if self.steps < 1:
            raise ValidationError(f"steps must be >= 1, got {self.steps}")
        if self.batch < 1:
            raise ValidationError(f"batch must be >= 1, got {self.batch}")
        if not 0.0 < self.alpha_bar_end < self.alpha_bar_start < 1.0:
            raise ValidationError("alpha_bar levels must satisfy 0 < end < start < 1")

    def alpha_bars(self) -> np.ndarray:
        """Levels indexed by step: [0] cleanest ... [steps] noisiest."""
        return np.linspace(self.alpha_bar_start, self.alpha_bar_end, self.steps + 1)


def ddim_step(x: np.ndarray, eps: np.ndarray, alpha_bar: float, alpha_bar_prev: float) -> np.ndarray:
    x0 = (x - np.sqrt(1.0 - alpha_bar) * eps) / np.sqrt(alpha_bar)
    return np.sqrt(alpha_bar_prev) * x0 + np.sqrt(1.0 - alpha_bar_prev) * eps


def initial_noise(net: ToyUNet, scfg: SamplerConfig) -> FeatureMap:
    shape = (scfg.batch, net.cfg.in_channels, *net.cfg.spatial)
    return FeatureMap(GaussianStream(scfg.seed).normal(shape))


def ddim_sample(
    net: ToyUNet,
    scfg: SamplerConfig,
    params: Union[RefineParams, BlockHook, None] = None,
    capture: Optional[List[BlockCapture]] = None,
) -> FeatureMap:
    """Run `steps` deterministic updates from seeded noise.

    When `capture` is given, decoder block features of the first step are appended.
    """
    levels = scfg.alpha_bars()
    x = initial_noise(net, scfg)
    for j in range(scfg.steps, 0, -1):
        step_capture = capture if j == scfg.steps else None
        eps = forward(net, x, j / scfg.steps, params, capture=step_capture)
        x = FeatureMap(ddim_step(
            x.data.astype(np.float64),
            eps.data.astype(np.float64),
            float(levels[j]),
            float(levels[j - 1]),
        ))
    logger.debug(f"DDIM sample done: steps={scfg.steps} seed={scfg.seed}")
    return x
