import math

import pytest

from gtvr.src.exceptions import AssumptionError
from gtvr.src.model.algorithms import AlgorithmKind
from gtvr.src.tuning import (
    SVRG_OUTER_RATE,
    big_data_check,
    complexity_report,
    saga_tuning,
    svrg_tuning,
    tune,
)


def test_saga_tuning_on_well_conditioned_problem():
    report = saga_tuning(mu=1.0, L=1.0, sigma=0.0, M=10, m=10)
    assert report.alpha == pytest.approx(1.0 / 320.0)
    assert report.rate == pytest.approx(1.0 - 1.0 / 1280.0)
    assert report.big_data
    assert report.svrg_T is None


def test_saga_step_capped_by_sample_count():
    # 1 / (5 mu M) is the smaller bound once m > 64 Q^2
    assert saga_tuning(mu=1.0, L=1.0, sigma=0.0, M=100, m=100).alpha == pytest.approx(1.0 / 500.0)
    assert saga_tuning(mu=1.0, L=1.0, sigma=0.0, M=50, m=50).alpha == pytest.approx(1.0 / 320.0)


def test_saga_tuning_shrinks_with_connectivity():
    dense = saga_tuning(0.1, 0.35, 0.0, 50, 50)
    sparse = saga_tuning(0.1, 0.35, 0.9, 50, 50)
    assert sparse.alpha < dense.alpha
    assert sparse.rate > dense.rate


def test_svrg_tuning():
    report = svrg_tuning(mu=1.0, L=1.0, sigma=0.0)
    assert report.alpha == pytest.approx(1.0 / 187.0)
    assert report.svrg_T == math.ceil(1496.0 * math.log(200.0))
    assert report.rate == SVRG_OUTER_RATE


def test_iterations_to_eps():
    saga = saga_tuning(1.0, 1.0, 0.0, 10, 10)
    expected = math.ceil(math.log(1e-10) / math.log(1.0 - 1.0 / 1280.0))
    assert saga.iters_to_eps(1e-10) == expected
    assert saga.grad_evals_to_eps(1e-10) == 10 + expected
    assert saga.comm_rounds_to_eps(1e-10) == expected

    svrg = svrg_tuning(1.0, 1.0, 0.0, M=10, m=10)
    loops = math.ceil(math.log(1e-10) / math.log(0.7))
    assert loops == 65
    assert svrg.iters_to_eps(1e-10) == loops * svrg.svrg_T
    assert svrg.grad_evals_to_eps(1e-10) == 10 + 2 * loops * svrg.svrg_T + loops * 10


def test_eps_range():
    with pytest.raises(ValueError):
        saga_tuning(1.0, 1.0, 0.0, 1, 1).iters_to_eps(1.5)


@pytest.mark.parametrize(
    "mu, L, sigma",
    [(0.0, 1.0, 0.5), (1.0, 0.5, 0.5), (1.0, 2.0, 1.0), (1.0, 2.0, -0.1)],
)
def test_assumption_violations(mu, L, sigma):
    with pytest.raises(AssumptionError):
        saga_tuning(mu, L, sigma, 10, 10)
    with pytest.raises(AssumptionError):
        svrg_tuning(mu, L, sigma)


def test_saga_needs_ordered_counts():
    with pytest.raises(AssumptionError):
        saga_tuning(1.0, 1.0, 0.0, 5, 10)


def test_big_data_check():
    assert big_data_check(M=10, m=10, Q=1.0, sigma=0.0)
    assert not big_data_check(M=13, m=10, Q=1.0, sigma=0.0)
    assert not big_data_check(M=100, m=100, Q=2.0, sigma=0.8)
    assert big_data_check(M=1000, m=1000, Q=2.0, sigma=0.8)
    assert not big_data_check(M=10, m=10, Q=1.0, sigma=1.0)


def test_tune_dispatch():
    assert tune("dsgd", 1.0, 1.0, 0.0, 5, 5) is None
    assert tune("gt_dsgd", 1.0, 1.0, 0.0, 5, 5) is None
    assert tune(AlgorithmKind.GT_SAGA, 1.0, 1.0, 0.0, 5, 5).algorithm == "gt_saga"
    assert tune("gt_svrg", 1.0, 1.0, 0.0, 5, 5).svrg_T is not None


def test_complexity_report():
    report = complexity_report(mu=0.1, L=0.35, sigma=0.6, M=200, m=200, eps=1e-10)
    assert report["Q"] == pytest.approx(3.5)
    assert report["imbalance"] == 1.0
    assert report["gt_saga_order"] == pytest.approx(
        max(200, 3.5**2 / 0.4**2) * math.log(1e10)
    )
    assert report["gt_saga_predicted"] == saga_tuning(0.1, 0.35, 0.6, 200, 200).grad_evals_to_eps(1e-10)
    assert report["gt_svrg_comm_rounds"] > report["gt_saga_comm_rounds"]


GRID = [
    (mu, L, sigma, M, m)
    for mu, L in ((1.0, 1.0), (0.05, 0.3), (0.01, 0.26), (0.001, 0.251))
    for sigma in (0.0, 0.6, 0.951)
    for M, m in ((10, 10), (1000, 800), (50000, 50000))
]


@pytest.mark.parametrize("mu, L, sigma, M, m", GRID)
def test_tuned_steps_respect_lipschitz_cap(mu, L, sigma, M, m):
    cap = 1.0 / (4.0 * math.sqrt(2.0) * L)
    assert saga_tuning(mu, L, sigma, M, m).alpha <= cap
    assert svrg_tuning(mu, L, sigma, M, m).alpha <= cap


def test_tuning_is_monotone_in_data_and_conditioning():
    samples = [saga_tuning(0.1, 0.35, 0.6, M, M).alpha for M in (10, 100, 1000, 10000)]
    assert samples == sorted(samples, reverse=True)
    conditioning = [saga_tuning(mu, 1.0, 0.6, 200, 200).alpha for mu in (1.0, 0.1, 0.01)]
    assert conditioning == sorted(conditioning, reverse=True)
    assert saga_tuning(0.1, 0.35, 0.6, 400, 100).alpha <= saga_tuning(0.1, 0.35, 0.6, 400, 400).alpha

    svrg = [svrg_tuning(mu, 1.0, 0.6) for mu in (1.0, 0.1, 0.01)]
    assert [r.alpha for r in svrg] == sorted((r.alpha for r in svrg), reverse=True)
    assert [r.svrg_T for r in svrg] == sorted(r.svrg_T for r in svrg)
    assert svrg[-1].svrg_T > svrg[0].svrg_T
    assert svrg_tuning(1.0, 1.0, 0.9).svrg_T > svrg_tuning(1.0, 1.0, 0.0).svrg_T
