from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from mel_refine.utils.exceptions import ValidationError
from mel_refine.utils.validators import TensorValidator

MID_GRAY = 128


def quantize_map(values: np.ndarray) -> np.ndarray:
    """Linear min->0 / max->255 uint8 image, low rows rendered at the bottom."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.size == 0:
        raise ValidationError(f"render expects a non-empty 2D map, got shape {values.shape}")
    TensorValidator.validate_finite(values, "render map")
    lo, hi = values.min(), values.max()
    if hi == lo:
        pixels = np.full(values.shape, MID_GRAY, dtype=np.uint8)
    else:
        pixels = np.rint((values - lo) / (hi - lo) * 255.0).astype(np.uint8)
    return np.flipud(pixels)


def render_png(values: np.ndarray, path: Union[str, Path]) -> None:
    """Write an 8-bit grayscale PNG of a 2D map."""
    Image.fromarray(np.ascontiguousarray(quantize_map(values))).save(str(path), format="PNG")
