"""Instance-level KL(ref || gen) between paired class posteriors."""

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from mel_refine.core.tensor import FeatureMap
from mel_refine.utils.exceptions import ValidationError
from mel_refine.utils.validators import TensorValidator

# probability vectors off by at most this much are renormalized; more is an error
NORMALIZATION_TOL = 1e-6


def _normalized(p: np.ndarray, what: str) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError(f"{what} must be a non-empty vector, got shape {p.shape}")
    TensorValidator.validate_finite(p, what)
    if np.any(p < 0):
        raise ValidationError(f"{what} has negative entries")
    total = p.sum()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise ValidationError(f"{what} sums to {total:.9f}, not 1")
    return p / total


@dataclass(frozen=True, eq=False)
class PosteriorPair:
    p_ref: np.ndarray
    p_gen: np.ndarray

    def __post_init__(self):
        p_ref = _normalized(self.p_ref, "reference posterior")
        p_gen = _normalized(self.p_gen, "generated posterior")
        if p_ref.size != p_gen.size:
            raise ValidationError(f"class count mismatch: {p_ref.size} vs {p_gen.size}")
        object.__setattr__(self, "p_ref", p_ref)
        object.__setattr__(self, "p_gen", p_gen)


def pairs_from_fmap(x: FeatureMap) -> List[PosteriorPair]:
    """FMAP (1, 2, n, k): channel 0 reference rows, channel 1 generated rows."""
    b, c, _, _ = x.dims
    if b != 1 or c != 2:
        raise ValidationError(f"posterior FMAP must have dims (1, 2, n, k), got {x.dims}")
    ref, gen = x.data[0, 0], x.data[0, 1]
    return [PosteriorPair(ref[i], gen[i]) for i in range(ref.shape[0])]


def paired_kl(pair: PosteriorPair, eps: float = 1e-10) -> float:
    p, q = pair.p_ref, pair.p_gen
    return float(np.sum(p * (np.log(p + eps) - np.log(q + eps))))


def mean_paired_kl(pairs: Sequence[PosteriorPair], eps: float = 1e-10) -> float:
    if not pairs:
        raise ValidationError("need at least one posterior pair")
    return float(np.mean([paired_kl(pair, eps) for pair in pairs]))
