"""Low/high frequency split of a center-shifted spectrum and band scaling."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from mel_refine.core.tensor import FeatureMap, fft2_shifted, ifft2_shifted
from mel_refine.utils.validators import TensorValidator


def low_region_bounds(height: int, width: int) -> Tuple[slice, slice]:
    """Half-open rows [H//4, 3H//4) and cols [W//4, 3W//4) in shifted coordinates."""
    return slice(height // 4, (3 * height) // 4), slice(width // 4, (3 * width) // 4)


def low_region(height: int, width: int) -> np.ndarray:
    """Boolean (H, W) array marking the central low-frequency rectangle."""
    rows, cols = low_region_bounds(height, width)
    region = np.zeros((height, width), dtype=bool)
    region[rows, cols] = True
    return region


def conjugate_index(n: int) -> np.ndarray:
    """Shifted index of the frequency -f for every shifted index along an axis of size n."""
    return (2 * (n // 2) - np.arange(n)) % n


def conjugate_view(values: np.ndarray) -> np.ndarray:
    """values[k] -> values[-k] over the last two axes, in shifted coordinates."""
    h, w = values.shape[-2:]
    return values[..., conjugate_index(h)[:, None], conjugate_index(w)[None, :]]


@dataclass(frozen=True, eq=False)
class BandMask:
    """Per-bin gains: lf_gain inside the low rectangle, hf_gain outside."""

    gains: np.ndarray
    lf_gain: float
    hf_gain: float

    @property
    def dims(self) -> Tuple[int, int]:
        h, w = self.gains.shape
        return int(h), int(w)

    @property
    def is_identity(self) -> bool:
        return self.lf_gain == 1.0 and self.hf_gain == 1.0

    def hermitian(self) -> np.ndarray:
        """Gains averaged with their conjugate partner bins.

        Scaling a real map's spectrum by these gains gives exactly the real part of
        scaling it by the raw rectangle, and keeps the spectrum conjugate-symmetric.
        """
        return 0.5 * (self.gains + conjugate_view(self.gains))


def central_region_mask(height: int, width: int, lf_gain: float, hf_gain: float) -> BandMask:
    TensorValidator.validate_spatial(height, width, 2, "band mask")
    TensorValidator.validate_gain("lf_gain", lf_gain)
    TensorValidator.validate_gain("hf_gain", hf_gain)
    gains = np.full((height, width), float(hf_gain), dtype=np.float64)
    rows, cols = low_region_bounds(height, width)
    gains[rows, cols] = float(lf_gain)
    gains.flags.writeable = False
    return BandMask(gains=gains, lf_gain=float(lf_gain), hf_gain=float(hf_gain))


def fourier_band_scale(x: FeatureMap, mask: BandMask) -> FeatureMap:
    """ifft2_shifted(fft2_shifted(x) * mask) for every (b, c) slice."""
    TensorValidator.validate_same_spatial(x.spatial, mask.dims, "band mask")
    return ifft2_shifted(fft2_shifted(x).scaled(mask.hermitian()))
