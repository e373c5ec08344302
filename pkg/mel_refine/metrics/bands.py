"""Low/high band spectral energy of feature maps."""

from dataclasses import dataclass
from typing import Dict

import numpy as np

from mel_refine.core.tensor import FeatureMap, fft2_shifted
from mel_refine.refine.bands import conjugate_view, low_region
from mel_refine.utils.validators import TensorValidator


@dataclass(frozen=True, eq=False)
class BandEnergy:
    """Per-slice (B, C) band powers and their batch totals."""

    lf: np.ndarray
    hf: np.ndarray

    @property
    def lf_total(self) -> float:
        return float(self.lf.sum())

    @property
    def hf_total(self) -> float:
        return float(self.hf.sum())

    def to_dict(self) -> Dict[str, object]:
        return {
            "lf": self.lf_total,
            "hf": self.hf_total,
            "slices": [
                {"b": b, "c": c, "lf": float(self.lf[b, c]), "hf": float(self.hf[b, c])}
                for b in range(self.lf.shape[0])
                for c in range(self.lf.shape[1])
            ],
        }


def band_masks(height: int, width: int, paired_only: bool = False):
    """Boolean (low, high) bin selections.

    With paired_only, bins whose conjugate partner lies in the other band are
    dropped from both, leaving the bins a real-output band scaling treats exactly.
    """
    low = low_region(height, width)
    high = ~low
    if paired_only:
        consistent = low == conjugate_view(low)
        low, high = low & consistent, high & consistent
    return low, high


def band_energy(x: FeatureMap, paired_only: bool = False) -> BandEnergy:
    """Spectral power sum |F|^2 inside and outside the central low rectangle."""
    height, width = x.spatial
    TensorValidator.validate_spatial(height, width, 2, "band energy input")
    power = np.abs(fft2_shifted(x).data) ** 2
    low, high = band_masks(height, width, paired_only)
    return BandEnergy(lf=power[..., low].sum(axis=-1), hf=power[..., high].sum(axis=-1))


def band_ratio(before: FeatureMap, after: FeatureMap, paired_only: bool = True) -> Dict[str, float]:
    """after / before band totals; a zero band maps to 1.0 when unchanged."""
    a, b = band_energy(before, paired_only), band_energy(after, paired_only)

    def ratio(num: float, den: float) -> float:
        if den == 0.0:
            return 1.0 if num == 0.0 else float("inf")
        return num / den

    return {"lf": ratio(b.lf_total, a.lf_total), "hf": ratio(b.hf_total, a.hf_total)}
