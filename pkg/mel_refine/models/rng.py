"""Platform-independent Gaussian stream for toy weights and sampler noise.

Raw 64-bit PCG64 outputs are mapped to 53-bit uniforms (k + 0.5) / 2**53, which
never hit 0 or 1, and then through the inverse normal CDF. Both steps are exact
functions of the seed, so checksums reproduce across platforms.
"""

from typing import Tuple

import numpy as np
from scipy.special import ndtri

_INV_2_53 = 1.0 / float(2 ** 53)


class GaussianStream:
    """Seeded standard-normal draws in a fixed order."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._bits = np.random.PCG64(self.seed)

    def uniform(self, count: int) -> np.ndarray:
        raw = self._bits.random_raw(count)
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53

    def normal(self, shape: Tuple[int, ...], std: float = 1.0) -> np.ndarray:
        count = int(np.prod(shape))
        return (ndtri(self.uniform(count)) * std).reshape(shape)
