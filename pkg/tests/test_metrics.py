import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from mel_refine.core.tensor import FeatureMap
from mel_refine.metrics.bands import band_energy, band_masks, band_ratio
from mel_refine.metrics.divergence import PosteriorPair, mean_paired_kl, paired_kl, pairs_from_fmap
from mel_refine.metrics.frechet import (
    EmbeddingSet,
    GaussianStats,
    embedding_distance,
    frechet_distance,
    gaussian_stats,
    trace_sqrt_product,
)
from mel_refine.refine.bands import conjugate_view
from mel_refine.utils.exceptions import ValidationError
from tests.conftest import checkerboard, naive_covariance


def _spd(rng, d):
    a = rng.standard_normal((d, d))
    return a @ a.T + d * np.eye(d)


def test_stats_of_two_points():
    stats = gaussian_stats(EmbeddingSet(np.array([[0.0, 0.0], [2.0, 2.0]])))
    assert stats.mu.tolist() == [1.0, 1.0]
    assert np.allclose(stats.sigma, [[2.0, 2.0], [2.0, 2.0]])


def test_repeated_vector_has_zero_covariance():
    stats = gaussian_stats(EmbeddingSet(np.tile([1.0, -2.0, 3.0], (5, 1))))
    assert np.all(stats.sigma == 0.0)


def test_covariance_matches_naive_loops(rng):
    rows = rng.standard_normal((50, 4))
    assert np.max(np.abs(gaussian_stats(EmbeddingSet(rows)).sigma - naive_covariance(rows))) <= 1e-10


def test_embedding_set_validation():
    with pytest.raises(ValidationError, match="at least 2"):
        EmbeddingSet(np.zeros((1, 3)))
    with pytest.raises(ValidationError):
        EmbeddingSet(np.zeros(3))
    with pytest.raises(ValidationError):
        EmbeddingSet(np.array([[0.0, np.inf], [1.0, 1.0]]))
    with pytest.raises(ValidationError, match="dims"):
        EmbeddingSet.from_fmap(FeatureMap(np.zeros((1, 2, 3, 4))))


def test_embedding_set_fmap_layout(rng):
    rows = rng.standard_normal((6, 5)).astype(np.float32)
    restored = EmbeddingSet.from_fmap(EmbeddingSet(rows).to_fmap())
    assert restored.n == 6 and restored.d == 5
    assert np.array_equal(restored.vectors, rows.astype(np.float64))


def test_stats_validation():
    with pytest.raises(ValidationError, match="symmetric"):
        GaussianStats(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValidationError):
        GaussianStats(np.zeros(3), np.eye(2))


def test_fd_of_identical_stats_is_zero(rng):
    stats = GaussianStats(rng.standard_normal(6), _spd(rng, 6))
    assert frechet_distance(stats, stats) == pytest.approx(0.0, abs=1e-8)


def test_fd_one_dimensional():
    a = GaussianStats(np.array([0.0]), np.array([[1.0]]))
    b = GaussianStats(np.array([1.0]), np.array([[1.0]]))
    assert frechet_distance(a, b) == pytest.approx(1.0, abs=1e-8)


def test_fd_diagonal():
    a = GaussianStats(np.zeros(2), np.eye(2))
    b = GaussianStats(np.zeros(2), 4 * np.eye(2))
    assert frechet_distance(a, b) == pytest.approx(2.0, abs=1e-8)


def test_fd_dimension_mismatch():
    with pytest.raises(ValidationError, match="dimension mismatch"):
        frechet_distance(GaussianStats(np.zeros(2), np.eye(2)), GaussianStats(np.zeros(3), np.eye(3)))


@pytest.mark.parametrize("d", range(1, 9))
def test_trace_sqrt_matches_eigen_oracle(rng, d):
    sa, sb = _spd(rng, d), _spd(rng, d)
    expected = float(np.sqrt(np.linalg.eigvals(sa @ sb).real).sum())
    assert trace_sqrt_product(sa, sb) == pytest.approx(expected, rel=1e-9, abs=1e-8)


def test_fd_translation_invariant(rng):
    shift = rng.standard_normal(4)
    a = GaussianStats(rng.standard_normal(4), _spd(rng, 4))
    b = GaussianStats(rng.standard_normal(4), _spd(rng, 4))
    moved = frechet_distance(GaussianStats(a.mu + shift, a.sigma), GaussianStats(b.mu + shift, b.sigma))
    assert moved == pytest.approx(frechet_distance(a, b), rel=1e-9, abs=1e-8)


def test_fd_grows_with_mean_distance(rng):
    direction = rng.standard_normal(4)
    a = GaussianStats(rng.standard_normal(4), _spd(rng, 4))
    sigma_b = _spd(rng, 4)
    distances = [
        frechet_distance(a, GaussianStats(a.mu + t * direction, sigma_b)) for t in (0.0, 0.5, 1.0, 2.0, 4.0)
    ]
    assert all(later > earlier for earlier, later in zip(distances, distances[1:]))
    assert distances[-1] - distances[0] == pytest.approx(16.0 * direction @ direction, rel=1e-9)


@hsettings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d=st.integers(1, 6))
def test_fd_symmetric_and_non_negative(seed, d):
    gen = np.random.default_rng(seed)
    a = GaussianStats(gen.standard_normal(d), _spd(gen, d))
    b = GaussianStats(gen.standard_normal(d), _spd(gen, d))
    forward, backward = frechet_distance(a, b), frechet_distance(b, a)
    assert forward >= 0.0
    assert forward == pytest.approx(backward, abs=1e-8 * max(1.0, forward))


def test_embedding_distance_rank_deficient_sets(rng):
    a, b = EmbeddingSet(rng.standard_normal((4, 10))), EmbeddingSet(rng.standard_normal((4, 10)) + 1.0)
    value = embedding_distance(a, b)
    assert math.isfinite(value) and value > 0
    assert embedding_distance(a, a) == pytest.approx(0.0, abs=1e-6)


def test_kl_identical_pairs_is_zero():
    pairs = [PosteriorPair(np.array([0.2, 0.3, 0.5]), np.array([0.2, 0.3, 0.5])) for _ in range(3)]
    assert mean_paired_kl(pairs) == pytest.approx(0.0, abs=1e-8)


def test_kl_certain_versus_uniform():
    pair = PosteriorPair(np.array([1.0, 0.0]), np.array([0.5, 0.5]))
    assert mean_paired_kl([pair]) == pytest.approx(math.log(2), abs=1e-4)
    reverse = PosteriorPair(np.array([0.5, 0.5]), np.array([1.0, 0.0]))
    assert paired_kl(reverse) != pytest.approx(paired_kl(pair), abs=1e-3)


def test_kl_non_negative_on_random_pairs(rng):
    for _ in range(1000):
        k = int(rng.integers(2, 12))
        p, q = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
        assert paired_kl(PosteriorPair(p, q)) >= -1e-9


@hsettings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8), st.lists(st.floats(0.0, 1.0), min_size=2, max_size=8))
def test_kl_non_negative_property(p_raw, q_raw):
    k = min(len(p_raw), len(q_raw))
    p, q = np.array(p_raw[:k]) + 1e-3, np.array(q_raw[:k]) + 1e-3
    assert paired_kl(PosteriorPair(p / p.sum(), q / q.sum())) >= -1e-9


def test_kl_normalization_rules():
    PosteriorPair(np.array([0.5, 0.5000005]), np.array([0.5, 0.5]))
    with pytest.raises(ValidationError, match="sums to"):
        PosteriorPair(np.array([0.5, 0.4]), np.array([0.5, 0.5]))
    with pytest.raises(ValidationError, match="negative"):
        PosteriorPair(np.array([1.5, -0.5]), np.array([0.5, 0.5]))
    with pytest.raises(ValidationError, match="class count"):
        PosteriorPair(np.array([0.5, 0.5]), np.array([0.2, 0.3, 0.5]))
    with pytest.raises(ValidationError, match="at least one"):
        mean_paired_kl([])


def test_pairs_from_fmap():
    data = np.zeros((1, 2, 2, 2), dtype=np.float32)
    data[0, 0] = [[1.0, 0.0], [0.5, 0.5]]
    data[0, 1] = [[0.5, 0.5], [0.5, 0.5]]
    pairs = pairs_from_fmap(FeatureMap(data))
    assert len(pairs) == 2
    assert mean_paired_kl(pairs) == pytest.approx(math.log(2) / 2, abs=1e-4)
    with pytest.raises(ValidationError):
        pairs_from_fmap(FeatureMap(np.zeros((1, 1, 2, 2))))


def test_parseval_on_random_maps(rng):
    for _ in range(100):
        h, w = (int(v) for v in rng.integers(2, 17, size=2))
        x = FeatureMap(rng.standard_normal((1, 2, h, w)))
        energy = band_energy(x)
        expected = h * w * np.sum(x.data.astype(np.float64) ** 2)
        assert energy.lf_total + energy.hf_total == pytest.approx(expected, rel=1e-4)


def test_constant_and_checkerboard_bands():
    constant = band_energy(FeatureMap(np.full((1, 1, 8, 8), 2.0)))
    assert constant.hf_total == pytest.approx(0.0, abs=1e-9)
    board = band_energy(FeatureMap(checkerboard(8, 8)[None, None]))
    assert board.lf_total == pytest.approx(0.0, abs=1e-9)
    assert board.hf_total == pytest.approx(64.0 ** 2)


@pytest.mark.parametrize("size", [(8, 8), (6, 10), (5, 7)])
def test_paired_masks_are_conjugate_closed(size):
    low, high = band_masks(*size, paired_only=True)
    assert not (low & high).any()
    assert np.array_equal(low, conjugate_view(low))
    assert np.array_equal(high, conjugate_view(high))


def test_band_energy_layout(random_map):
    energy = band_energy(random_map(2, 3, 8, 8))
    assert energy.lf.shape == (2, 3) and energy.hf.shape == (2, 3)
    summary = energy.to_dict()
    assert len(summary["slices"]) == 6
    assert summary["lf"] == pytest.approx(energy.lf_total)


def test_band_ratio_identity(random_map):
    x = random_map(1, 2, 8, 8)
    assert band_ratio(x, x) == {"lf": 1.0, "hf": 1.0}
    zero = FeatureMap(np.zeros((1, 1, 4, 4)))
    assert band_ratio(zero, zero) == {"lf": 1.0, "hf": 1.0}
