"""Fréchet distance between Gaussians fitted to embedding sets (FD / FAD)."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from mel_refine.core.tensor import FeatureMap
from mel_refine.utils.exceptions import ValidationError
from mel_refine.utils.validators import TensorValidator

EIGEN_TOL = 1e-8
# eigenvalues this small relative to the largest are rounding noise of a zero
NOISE_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """n embeddings of dimension d, one row per clip."""

    vectors: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ValidationError(f"embeddings must be an n x d matrix, got shape {vectors.shape}")
        n, d = vectors.shape
        if n < 2:
            raise ValidationError(f"need at least 2 embeddings for a covariance, got {n}")
        if d < 1:
            raise ValidationError("embedding dimension must be >= 1")
        TensorValidator.validate_finite(vectors, "embeddings")
        object.__setattr__(self, "vectors", vectors)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def from_fmap(cls, x: FeatureMap) -> "EmbeddingSet":
        """FMAP files carry embeddings as dims (1, 1, n, d)."""
        b, c, _, _ = x.dims
        if b != 1 or c != 1:
            raise ValidationError(f"embedding FMAP must have dims (1, 1, n, d), got {x.dims}")
        return cls(x.data[0, 0])

    def to_fmap(self) -> FeatureMap:
        return FeatureMap(self.vectors[None, None])


@dataclass(frozen=True, eq=False)
class GaussianStats:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=np.float64))
        if mu.ndim != 1 or sigma.shape != (mu.size, mu.size):
            raise ValidationError(f"stats shapes disagree: mu {mu.shape}, sigma {sigma.shape}")
        TensorValidator.validate_finite(mu, "mu")
        TensorValidator.validate_finite(sigma, "sigma")
        if not np.allclose(sigma, sigma.T, rtol=0.0, atol=EIGEN_TOL):
            raise ValidationError("sigma must be symmetric")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", 0.5 * (sigma + sigma.T))

    @property
    def d(self) -> int:
        return self.mu.size


def gaussian_stats(embeddings: EmbeddingSet) -> GaussianStats:
    """Column mean and unbiased (n - 1) covariance."""
    mu = embeddings.vectors.mean(axis=0)
    sigma = np.atleast_2d(np.cov(embeddings.vectors, rowvar=False, ddof=1))
    return GaussianStats(mu=mu, sigma=0.5 * (sigma + sigma.T))


def _clamped_eigenvalues(matrix: np.ndarray, what: str) -> np.ndarray:
    values = linalg.eigvalsh(matrix)
    if values.min(initial=0.0) < -EIGEN_TOL * max(1.0, float(np.abs(values).max(initial=0.0))):
        raise ValidationError(f"{what} is not positive semi-definite (eigenvalue {values.min():.3e})")
    values = np.clip(values, 0.0, None)
    values[values < NOISE_FLOOR * values.max(initial=0.0)] = 0.0
    return values


def psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    values, vectors = linalg.eigh(matrix)
    if values.min(initial=0.0) < -EIGEN_TOL * max(1.0, float(np.abs(values).max(initial=0.0))):
        raise ValidationError(f"covariance is not positive semi-definite (eigenvalue {values.min():.3e})")
    values = np.clip(values, 0.0, None)
    values[values < NOISE_FLOOR * values.max(initial=0.0)] = 0.0
    roots = np.sqrt(values)
    return (vectors * roots) @ vectors.T


def trace_sqrt_product(sigma_a: np.ndarray, sigma_b: np.ndarray) -> float:
    """Tr((Sa Sb)^1/2) via the eigenvalues of the symmetric sqrt(Sa) Sb sqrt(Sa)."""
    root_a = psd_sqrt(sigma_a)
    inner = root_a @ sigma_b @ root_a
    inner = 0.5 * (inner + inner.T)
    return float(np.sqrt(_clamped_eigenvalues(inner, "sqrt(Sa) Sb sqrt(Sa)")).sum())


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^1/2), never negative."""
    if a.d != b.d:
        raise ValidationError(f"dimension mismatch: {a.d} vs {b.d}")
    diff = a.mu - b.mu
    value = float(diff @ diff + np.trace(a.sigma) + np.trace(b.sigma)
                  - 2.0 * trace_sqrt_product(a.sigma, b.sigma))
    if value < 0.0:
        scale = max(1.0, float(np.trace(a.sigma) + np.trace(b.sigma)))
        if value < -EIGEN_TOL * scale:
            raise ValidationError(f"Fréchet distance came out negative ({value:.3e})")
        value = 0.0
    return value


def embedding_distance(reference: EmbeddingSet, generated: EmbeddingSet) -> float:
    return frechet_distance(gaussian_stats(reference), gaussian_stats(generated))
