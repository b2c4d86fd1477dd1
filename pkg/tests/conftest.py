import numpy as np
import pytest

from dppseq.kernels import (
    DiversityKernelLowRank,
    GroundSet,
    QualityVector,
    build_sequence_kernel,
)


def random_unit_row_kernel(n_items, latent_dim, rng):
    V = rng.standard_normal((n_items, latent_dim))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    return DiversityKernelLowRank(V, normalized=True)


def random_sequence_kernel(n, rng, n_targets=None, latent_dim=None):
    """Random instance kernel: unit-row diversity factors, raw scores in a
    moderate range, targets followed by negatives."""
    if n_targets is None:
        n_targets = max(1, n // 2)
    if latent_dim is None:
        latent_dim = max(2, n)
    kernel = random_unit_row_kernel(n + 3, latent_dim, rng)
    gs = GroundSet(
        previous=(),
        targets=tuple(range(n_targets)),
        negatives=tuple(range(n_targets, n)),
    )
    raw = rng.uniform(-1.5, 1.5, size=n)
    quality = QualityVector.from_raw_scores(raw)
    return build_sequence_kernel(quality, kernel, gs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
