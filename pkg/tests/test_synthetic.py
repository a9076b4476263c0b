import numpy as np
import pytest

from gtvr.src.data.datasets import has_unit_features
from gtvr.src.data.synthetic import synth_logistic, synth_quadratic
from gtvr.src.exceptions import InvalidSizeError


def test_logistic_is_deterministic_and_unit_norm():
    a = synth_logistic(40, 6, seed=1, separation=2.0)
    b = synth_logistic(40, 6, seed=1, separation=2.0)
    np.testing.assert_array_equal(a.features, b.features)
    assert has_unit_features(a)
    assert a.labels[:4].tolist() == [1.0, -1.0, 1.0, -1.0]


def test_logistic_clusters_separate_along_labels():
    data = synth_logistic(400, 4, seed=0, separation=3.0)
    pos = data.features[data.labels > 0].mean(axis=0)
    neg = data.features[data.labels < 0].mean(axis=0)
    assert np.linalg.norm(pos - neg) > 1.0


def test_logistic_rejects_tiny_sets():
    with pytest.raises(InvalidSizeError):
        synth_logistic(1, 3, seed=0, separation=1.0)


def test_quadratic_blocks():
    centers = synth_quadratic(3, [2, 4, 5], p=7, seed=0)
    assert [c.shape for c in centers] == [(2, 7), (4, 7), (5, 7)]


def test_quadratic_homogeneous_nodes_share_offset():
    centers = synth_quadratic(4, [3] * 4, p=2, seed=0, heterogeneity=0.0, spread=0.0)
    np.testing.assert_array_equal(np.concatenate(centers), np.zeros((12, 2)))
