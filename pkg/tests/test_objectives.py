import numpy as np
import pytest

from gtvr.src.data.datasets import Dataset
from gtvr.src.exceptions import DimensionError, StrongConvexityError
from gtvr.src.model.objectives import (
    LogisticObjective,
    QuadraticObjective,
    constants_logistic,
    logistic_component,
    neg_sigmoid,
    quadratic_component,
)


def test_neg_sigmoid_is_stable():
    values = neg_sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    assert np.all(np.isfinite(values))
    np.testing.assert_allclose(values, [1.0, 0.5, 0.0])


def test_logistic_component_extremes_stay_finite():
    theta = np.array([1.0, 0.0])
    value, grad = logistic_component(theta, -1.0, 0.0, np.array([800.0, 0.0]))
    assert value == pytest.approx(800.0)
    np.testing.assert_allclose(grad, [1.0, 0.0])


def test_logistic_constants(logistic):
    assert logistic.mu == pytest.approx(0.1)
    assert logistic.L == pytest.approx(0.35)
    assert logistic.Q == pytest.approx(3.5)
    assert (logistic.M, logistic.m) == (6, 6)


def test_logistic_needs_positive_lam():
    data = Dataset(np.eye(2), np.array([1.0, -1.0]))
    with pytest.raises(StrongConvexityError):
        constants_logistic(data, 0.0)


def test_component_grads_match_single_components(logistic, quadratic, rng):
    for objective in (logistic, quadratic):
        x = rng.standard_normal(objective.dim)
        stacked = objective.component_grads(1, x)
        single = np.stack([objective.component_grad(1, j, x) for j in range(objective.counts[1])])
        np.testing.assert_allclose(stacked, single, rtol=1e-12, atol=1e-14)


def test_local_values_average_components(logistic, quadratic, rng):
    for objective in (logistic, quadratic):
        x = rng.standard_normal(objective.dim)
        expected = np.mean([objective.component_value(2, j, x) for j in range(objective.counts[2])])
        assert objective.local_value(2, x) == pytest.approx(expected, rel=1e-12)


def test_values_vectorized_over_rows(logistic, rng):
    X = rng.standard_normal((3, logistic.dim))
    np.testing.assert_allclose(logistic.values(X), [logistic.value(x) for x in X], rtol=1e-12)


def test_quadratic_minimizer_with_unequal_counts():
    objective = QuadraticObjective([np.array([[0.0], [2.0]]), np.array([[4.0]])])
    np.testing.assert_allclose(objective.minimizer(), [2.5])
    np.testing.assert_allclose(objective.full_grad(objective.minimizer()), [0.0], atol=1e-15)


def test_quadratic_gaps_are_exact(quadratic, rng):
    x_star = quadratic.minimizer()
    f_star = quadratic.value(x_star)
    X = x_star + 1e-3 * rng.standard_normal((4, quadratic.dim))
    np.testing.assert_allclose(
        quadratic.gaps(X, x_star, f_star), quadratic.values(X) - f_star, rtol=1e-6
    )
    assert quadratic.gaps(x_star[None, :], x_star, f_star)[0] == 0.0


def test_merged_keeps_the_global_cost(logistic, quadratic, rng):
    for objective in (logistic, quadratic):
        merged = objective.merged()
        x = rng.standard_normal(objective.dim)
        assert merged.n_nodes == 1
        assert merged.counts[0] == objective.counts.sum()
        assert merged.value(x) == pytest.approx(objective.value(x), rel=1e-12)


def test_dimension_mismatch(logistic, quadratic):
    with pytest.raises(DimensionError):
        logistic.component_grad(0, 0, np.zeros(logistic.dim + 1))
    with pytest.raises(DimensionError):
        quadratic.component_grads(0, np.zeros(quadratic.dim + 2))


def test_describe(logistic):
    info = logistic.describe()
    assert info["name"] == "logistic" and info["lam"] == 0.1 and info["counts"] == [6] * 4


def test_quadratic_component():
    value, grad = quadratic_component(np.array([1.0, -2.0]), np.array([4.0, 2.0]))
    assert value == pytest.approx(12.5)
    np.testing.assert_allclose(grad, [3.0, 4.0])
    with pytest.raises(DimensionError):
        quadratic_component(np.zeros(2), np.zeros(3))


def test_component_gradients_are_lipschitz_with_reported_constant(logistic, quadratic, rng):
    for objective in (logistic, quadratic):
        for _ in range(50):
            a, b = rng.standard_normal((2, objective.dim)) * 3.0
            i = int(rng.integers(objective.n_nodes))
            for j in range(int(objective.counts[i])):
                diff = objective.component_grad(i, j, a) - objective.component_grad(i, j, b)
                assert np.linalg.norm(diff) <= objective.L * np.linalg.norm(a - b) * (1 + 1e-12)


def test_logistic_gradient_norm_bound(logistic, rng):
    for scale in (0.1, 1.0, 100.0):
        for _ in range(20):
            x = rng.standard_normal(logistic.dim) * scale
            i = int(rng.integers(logistic.n_nodes))
            grads = logistic.component_grads(i, x)
            bound = 1.0 + logistic.lam * np.linalg.norm(x)
            assert np.all(np.isfinite(grads))
            assert np.all(np.linalg.norm(grads, axis=1) <= bound * (1 + 1e-12))
