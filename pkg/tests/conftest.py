# tests/conftest.py
import numpy as np
import pytest

from mel_refine.config.settings import settings
from mel_refine.core.tensor import FeatureMap


def naive_dft2_shifted(plane: np.ndarray) -> np.ndarray:
    """Double-sum DFT of one (H, W) plane with rows/cols ordered DC-centred."""
    plane = np.asarray(plane, dtype=np.float64)
    height, width = plane.shape
    out = np.zeros((height, width), dtype=np.complex128)
    for sy in range(height):
        u = (sy - height // 2) % height
        for sx in range(width):
            v = (sx - width // 2) % width
            total = 0j
            for y in range(height):
                for x in range(width):
                    total += plane[y, x] * np.exp(-2j * np.pi * (u * y / height + v * x / width))
            out[sy, sx] = total
    return out


def naive_idft2_shifted(spectrum: np.ndarray) -> np.ndarray:
    """Inverse of naive_dft2_shifted; returns the complex plane."""
    height, width = spectrum.shape
    out = np.zeros((height, width), dtype=np.complex128)
    for y in range(height):
        for x in range(width):
            total = 0j
            for sy in range(height):
                u = (sy - height // 2) % height
                for sx in range(width):
                    v = (sx - width // 2) % width
                    total += spectrum[sy, sx] * np.exp(2j * np.pi * (u * y / height + v * x / width))
            out[y, x] = total / (height * width)
    return out


def naive_structure_scale(data: np.ndarray, m: float, eps: float = 1e-8) -> np.ndarray:
    """Scalar loops over channel mean, min-max normalisation and the [1, m] map."""
    data = np.asarray(data, dtype=np.float64)
    batch, channels, height, width = data.shape
    out = np.empty_like(data)
    for b in range(batch):
        mean = np.zeros((height, width))
        for y in range(height):
            for x in range(width):
                acc = 0.0
                for c in range(channels):
                    acc += data[b, c, y, x]
                mean[y, x] = acc / channels
        lo = min(mean[y, x] for y in range(height) for x in range(width))
        hi = max(mean[y, x] for y in range(height) for x in range(width))
        for y in range(height):
            for x in range(width):
                alpha = 1.0 if hi - lo < eps else (m - 1.0) * (mean[y, x] - lo) / (hi - lo) + 1.0
                for c in range(channels):
                    out[b, c, y, x] = data[b, c, y, x] * alpha
    return out


def naive_covariance(rows: np.ndarray) -> np.ndarray:
    """Two-pass unbiased covariance."""
    rows = np.asarray(rows, dtype=np.float64)
    n, d = rows.shape
    mean = [sum(rows[i, j] for i in range(n)) / n for j in range(d)]
    cov = np.zeros((d, d))
    for a in range(d):
        for b in range(d):
            cov[a, b] = sum((rows[i, a] - mean[a]) * (rows[i, b] - mean[b]) for i in range(n)) / (n - 1)
    return cov


def checkerboard(height: int, width: int) -> np.ndarray:
    y, x = np.indices((height, width))
    return np.where((y + x) % 2 == 0, 1.0, -1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def random_map(rng):
    def make(*dims: int) -> FeatureMap:
        return FeatureMap(rng.standard_normal(dims))
    return make


@pytest.fixture
def fresh_settings():
    """Settings re-read from the (monkeypatched) environment, restored afterwards."""
    settings.reset()
    yield settings
    settings.reset()
