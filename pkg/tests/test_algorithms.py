from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from gtvr.src.exceptions import ConfigError, DimensionError, PreconditionError
from gtvr.src.graph.topology import build_complete, build_geometric
from gtvr.src.graph.weights import build_mixing
from gtvr.src.model.algorithms import (
    AlgorithmKind,
    AlgorithmSpec,
    check_symmetric_weights,
    estimator_variance,
    init_states,
    mix,
    stack,
    step,
)
from gtvr.src.model.estimators import CounterStream
from gtvr.src.model.objectives import QuadraticObjective


def test_kind_properties():
    assert AlgorithmKind("gt_saga").label == "GT-SAGA"
    assert not AlgorithmKind.DSGD.tracks_gradient
    assert AlgorithmKind.GT_SVRG.variance_reduced
    assert not AlgorithmKind.GT_DSGD.variance_reduced
    assert AlgorithmKind("dsa").estimator == "saga"
    assert AlgorithmKind.DAVRG.estimator == "svrg"
    for kind in (AlgorithmKind.DSA, AlgorithmKind.DAVRG):
        assert kind.variance_reduced and kind.needs_symmetric_weights
        assert not kind.tracks_gradient
    assert not AlgorithmKind.GT_SAGA.needs_symmetric_weights


@pytest.mark.parametrize(
    "kwargs, field",
    [
        ({"kind": "gt_saga", "alpha": 0.0}, "algorithm.alpha"),
        ({"kind": "dsgd", "alpha": float("nan")}, "algorithm.alpha"),
        ({"kind": "gt_svrg", "alpha": 0.1}, "algorithm.svrg_T"),
        ({"kind": "davrg", "alpha": 0.1}, "algorithm.svrg_T"),
        ({"kind": "dsa", "alpha": 0.1, "schedule": "inverse"}, "algorithm.schedule"),
        ({"kind": "gt_saga", "alpha": 0.1, "schedule": "inverse"}, "algorithm.schedule"),
        ({"kind": "dsgd", "alpha": 0.1, "schedule": "cosine"}, "algorithm.schedule"),
        ({"kind": "dsgd", "alpha": 0.1, "schedule": "inverse", "k0": 0.0}, "algorithm.k0"),
    ],
)
def test_spec_validation(kwargs, field):
    with pytest.raises(ConfigError) as err:
        AlgorithmSpec(**kwargs)
    assert err.value.field == field


def test_inverse_schedule():
    spec = AlgorithmSpec(kind="gt_dsgd", alpha=0.2, schedule="inverse", k0=10.0)
    assert spec.kind is AlgorithmKind.GT_DSGD
    assert spec.step_size(0) == 0.2
    assert spec.step_size(10) == pytest.approx(0.1)


def test_mix_shapes():
    W = np.full((2, 2), 0.5)
    np.testing.assert_allclose(mix(W, np.array([[1.0, 0.0], [3.0, 2.0]])), [[2.0, 1.0], [2.0, 1.0]])
    with pytest.raises(DimensionError):
        mix(W, np.zeros((3, 2)))


def test_init_states(quadratic):
    saga = init_states(quadratic, AlgorithmKind.GT_SAGA)
    assert saga[0].grad_table.shape == (8, quadratic.dim)
    np.testing.assert_allclose(saga[0].y, quadratic.batch_grad(0, np.zeros(quadratic.dim)))
    assert [s.grad_evals for s in saga] == [8] * 5

    svrg = init_states(quadratic, "gt_svrg", x0=np.ones(quadratic.dim))
    np.testing.assert_array_equal(svrg[2].snapshot_x, np.ones(quadratic.dim))

    dsgd = init_states(quadratic, AlgorithmKind.DSGD)
    assert all(s.grad_evals == 0 and not s.y.any() for s in dsgd)


def test_init_states_rejects_bad_start(quadratic):
    with pytest.raises(DimensionError):
        init_states(quadratic, AlgorithmKind.GT_DSGD, x0=np.zeros((2, quadratic.dim)))


def test_dsgd_uses_gradient_at_old_iterate():
    objective = QuadraticObjective([np.array([[1.0], [3.0]])])
    W = build_mixing(build_complete(1)).W
    spec = AlgorithmSpec(kind="dsgd", alpha=0.5)
    stream = CounterStream(0)
    states = init_states(objective, spec.kind, x0=np.array([2.0]))
    j = int(stream.sample_indices(0, objective.counts)[0])
    states, spent = step(spec, W, states, objective, 0, stream)
    center = objective.centers[0][j, 0]
    assert states[0].x[0] == pytest.approx(2.0 - 0.5 * (2.0 - center))
    assert spent.tolist() == [1]


@pytest.mark.parametrize("kind", ["gt_saga", "gt_svrg", "gt_dsgd"])
def test_tracker_mean_follows_estimator_mean(kind, quadratic, exp5):
    spec = AlgorithmSpec(kind=kind, alpha=0.05, svrg_T=7)
    states = init_states(quadratic, spec.kind)
    stream = CounterStream(1)
    for k in range(60):
        states, _ = step(spec, exp5.W, states, quadratic, k, stream)
        np.testing.assert_allclose(
            stack(states, "y").mean(axis=0), stack(states, "r_prev").mean(axis=0), atol=1e-12
        )


def test_threaded_rounds_match_serial(logistic, ring4):
    spec = AlgorithmSpec(kind="gt_saga", alpha=0.1)

    def run(pool):
        states = init_states(logistic, spec.kind)
        stream = CounterStream(9)
        for k in range(40):
            states, _ = step(spec, ring4.W, states, logistic, k, stream, pool)
        return stack(states, "x")

    with ThreadPoolExecutor(max_workers=3) as pool:
        np.testing.assert_array_equal(run(None), run(pool))


def test_gt_saga_reaches_exact_solution(quadratic, exp5):
    spec = AlgorithmSpec(kind="gt_saga", alpha=0.05)
    states = init_states(quadratic, spec.kind)
    stream = CounterStream(0)
    for k in range(3000):
        states, _ = step(spec, exp5.W, states, quadratic, k, stream)
    X = stack(states, "x")
    np.testing.assert_allclose(X, np.tile(quadratic.minimizer(), (5, 1)), atol=1e-6)
    assert estimator_variance(quadratic, states) < 1e-16
    Y = stack(states, "y")
    assert np.sum((X - X.mean(axis=0)) ** 2) < 1e-18
    assert np.sum((Y - Y.mean(axis=0)) ** 2) < 1e-18


def test_estimator_variance_zero_at_start(quadratic):
    assert estimator_variance(quadratic, init_states(quadratic, "gt_saga")) == pytest.approx(0.0)


def test_dsa_first_round_is_a_plain_diffusion_step(quadratic):
    W = build_mixing(build_complete(5)).W
    spec = AlgorithmSpec(kind="dsa", alpha=0.05)
    stream = CounterStream(4)
    states = init_states(quadratic, spec.kind)
    assert all(s.x_prev is None and not s.y.any() for s in states)
    X0 = stack(states, "x")
    # the table was filled at x0, so the first SAGA estimate is the local batch gradient
    G0 = np.stack([quadratic.batch_grad(i, X0[i]) for i in range(5)])
    states, spent = step(spec, W, states, quadratic, 0, stream)
    np.testing.assert_allclose(stack(states, "x"), W @ X0 - 0.05 * G0)
    np.testing.assert_array_equal(stack(states, "x_prev"), X0)
    assert spent.tolist() == [1] * 5


@pytest.mark.parametrize("kind, svrg_T", [("dsa", None), ("davrg", 8)])
def test_corrected_methods_reach_exact_solution(kind, svrg_T, quadratic):
    W = build_mixing(build_complete(5)).W
    spec = AlgorithmSpec(kind=kind, alpha=0.05, svrg_T=svrg_T)
    states = init_states(quadratic, spec.kind)
    stream = CounterStream(2)
    for k in range(3000):
        states, _ = step(spec, W, states, quadratic, k, stream)
    np.testing.assert_allclose(stack(states, "x"), np.tile(quadratic.minimizer(), (5, 1)), atol=1e-8)


def test_davrg_on_geometric_graph(quadratic):
    mixing = build_mixing(build_geometric(5, 0.8, seed=0))
    check_symmetric_weights(AlgorithmKind.DAVRG, mixing.W)
    spec = AlgorithmSpec(kind="davrg", alpha=0.05, svrg_T=8)
    states = init_states(quadratic, spec.kind)
    np.testing.assert_array_equal(states[0].psi, states[0].x)
    stream = CounterStream(0)
    for k in range(3000):
        states, _ = step(spec, mixing.W, states, quadratic, k, stream)
    np.testing.assert_allclose(stack(states, "x"), np.tile(quadratic.minimizer(), (5, 1)), atol=1e-6)


def test_corrected_methods_need_symmetric_weights(exp5):
    with pytest.raises(PreconditionError, match="DSA"):
        check_symmetric_weights(AlgorithmKind.DSA, exp5.W)
    check_symmetric_weights(AlgorithmKind.GT_SAGA, exp5.W)
