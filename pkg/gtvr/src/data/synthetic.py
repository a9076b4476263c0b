import numpy as np

from gtvr.src.data.datasets import Dataset, normalize_unit
from gtvr.src.exceptions import InvalidSizeError


def synth_logistic(n_samples: int, p: int, seed: int, separation: float) -> Dataset:
    """
    Two unit-variance Gaussian clusters centered at ``+-separation * u``.

    ``u`` is a random unit direction; samples alternate between the ``+1`` and ``-1`` cluster
    and are unit-normalized afterwards. Deterministic in ``seed``.
    """
    if n_samples < 2 or p < 1:
        raise InvalidSizeError(f"Need n_samples >= 2 and p >= 1, got ({n_samples}, {p})")
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(p)
    u /= np.linalg.norm(u)
    labels = np.where(np.arange(n_samples) % 2 == 0, 1.0, -1.0)
    features = labels[:, None] * separation * u[None, :] + rng.standard_normal((n_samples, p))
    return normalize_unit(Dataset(features, labels))


def synth_quadratic(
    n_nodes: int, counts, p: int, seed: int, heterogeneity: float = 1.0, spread: float = 1.0
):
    """
    Centers ``c_ij`` of quadratic components, one ``m_i x p`` block per node.

    Node ``i`` draws an offset ``b_i ~ heterogeneity * N(0, I)`` and its components scatter
    around it with standard deviation ``spread``, so ``heterogeneity > 0`` makes the local
    minimizers disagree.
    """
    if n_nodes < 1 or p < 1:
        raise InvalidSizeError(f"Need n_nodes >= 1 and p >= 1, got ({n_nodes}, {p})")
    rng = np.random.default_rng(seed)
    offsets = heterogeneity * rng.standard_normal((n_nodes, p))
    return [offsets[i] + spread * rng.standard_normal((int(counts[i]), p)) for i in range(n_nodes)]
