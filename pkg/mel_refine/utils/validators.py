import math
from typing import Tuple

import numpy as np

from mel_refine.utils.exceptions import ValidationError


class TensorValidator:
    """Array and scalar validation utilities."""

    @classmethod
    def validate_finite(cls, data: np.ndarray, what: str = "array") -> bool:
        """Reject NaN/Inf, naming the first offending index."""
        finite = np.isfinite(data)
        if not finite.all():
            index = tuple(int(i) for i in np.argwhere(~finite)[0])
            raise ValidationError(
                f"{what} contains a non-finite value {data[index]!r} at index {index}"
            )
        return True

    @classmethod
    def validate_rank(cls, data: np.ndarray, rank: int, what: str = "array") -> bool:
        """Require an exact number of dimensions, each at least 1."""
        if data.ndim != rank:
            raise ValidationError(f"{what} must have rank {rank}, got shape {data.shape}")
        if any(d < 1 for d in data.shape):
            raise ValidationError(f"{what} dims must all be >= 1, got {data.shape}")
        return True

    @classmethod
    def validate_spatial(cls, height: int, width: int, minimum: int = 2, what: str = "map") -> bool:
        """Require both spatial dims to be at least `minimum`."""
        if height < minimum or width < minimum:
            raise ValidationError(
                f"{what} spatial dims must be >= {minimum}, got {height}x{width}"
            )
        return True

    @classmethod
    def validate_same_spatial(cls, a: Tuple[int, int], b: Tuple[int, int], what: str = "mask") -> bool:
        if tuple(a) != tuple(b):
            raise ValidationError(f"{what} dims {tuple(b)} do not match map spatial dims {tuple(a)}")
        return True

    @classmethod
    def validate_gain(cls, name: str, value: float, minimum: float = 0.0, inclusive: bool = False) -> bool:
        """Require a finite gain above (or at) `minimum`."""
        if not math.isfinite(value):
            raise ValidationError(f"{name} must be finite, got {value!r}")
        if value < minimum or (value == minimum and not inclusive):
            bound = ">=" if inclusive else ">"
            raise ValidationError(f"{name} must be {bound} {minimum}, got {value!r}")
        return True
