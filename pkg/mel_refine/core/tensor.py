"""Rank-4 feature maps and their center-shifted 2D spectra.

Spatial transforms run over the last two axes of a (B, C, H, W) array. The
forward transform is unnormalized; the inverse carries the 1/(H*W) factor.
Storage is 32-bit, transforms accumulate in 64-bit.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from mel_refine.utils.exceptions import NonRealSpectrumError, ValidationError
from mel_refine.utils.validators import TensorValidator

SPATIAL_AXES = (-2, -1)

# ifft2_shifted residue tolerance, relative to the largest real component
IMAG_RESIDUE_TOL = 1e-4


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Immutable real (B, C, H, W) feature map stored as float32."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float32, copy=True)
        TensorValidator.validate_rank(arr, 4, "FeatureMap")
        TensorValidator.validate_finite(arr, "FeatureMap")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> Tuple[int, int, int, int]:
        b, c, h, w = self.data.shape
        return int(b), int(c), int(h), int(w)

    @property
    def spatial(self) -> Tuple[int, int]:
        return self.dims[2], self.dims[3]

    def slice(self, b: int, c: int) -> np.ndarray:
        return self.data[b, c]

    def bitwise_equal(self, other: "FeatureMap") -> bool:
        return self.data.shape == other.data.shape and self.data.tobytes() == other.data.tobytes()


@dataclass(frozen=True, eq=False)
class SpectrumMap:
    """Complex (B, C, H, W) spectrum with DC at (H // 2, W // 2)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.complex128)
        if arr.ndim != 4:
            raise ValidationError(f"SpectrumMap must have rank 4, got shape {arr.shape}")
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> Tuple[int, int, int, int]:
        b, c, h, w = self.data.shape
        return int(b), int(c), int(h), int(w)

    @property
    def dc_index(self) -> Tuple[int, int]:
        _, _, h, w = self.dims
        return h // 2, w // 2

    def scaled(self, gains: np.ndarray) -> "SpectrumMap":
        """Multiply every (b, c) slice by an (H, W) gain array."""
        return SpectrumMap(self.data * gains)


def fft2_shifted(x: FeatureMap) -> SpectrumMap:
    """Per-slice 2D DFT over (H, W), center-shifted so DC sits at (H // 2, W // 2)."""
    TensorValidator.validate_finite(x.data, "fft2_shifted input")
    spectrum = np.fft.fft2(x.data.astype(np.float64), axes=SPATIAL_AXES)
    return SpectrumMap(np.fft.fftshift(spectrum, axes=SPATIAL_AXES))


def ifft2_shifted(spectrum: SpectrumMap) -> FeatureMap:
    """Invert fft2_shifted, requiring the result to be real up to round-off."""
    unshifted = np.fft.ifftshift(spectrum.data, axes=SPATIAL_AXES)
    values = np.fft.ifft2(unshifted, axes=SPATIAL_AXES)
    max_real = float(np.max(np.abs(values.real))) if values.size else 0.0
    max_imag = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if max_imag > IMAG_RESIDUE_TOL * max_real + 1e-12:
        raise NonRealSpectrumError(
            f"imaginary residue {max_imag:.3e} exceeds {IMAG_RESIDUE_TOL:g} x max real {max_real:.3e}; "
            "spectrum is not conjugate-symmetric"
        )
    return FeatureMap(values.real)
