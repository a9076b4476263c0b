"""Property suites run by ``gtvr verify`` on small instances."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np
from prettytable import PrettyTable

from gtvr.src.data.datasets import Dataset
from gtvr.src.data.splitters import partition
from gtvr.src.data.synthetic import synth_logistic, synth_quadratic
from gtvr.src.exceptions import GTVRError
from gtvr.src.graph.topology import (
    Topology,
    build_complete,
    build_exponential,
    build_geometric,
    build_ring,
)
from gtvr.src.graph.weights import MixingMatrix, build_mixing, check_doubly_stochastic, spectral_gap
from gtvr.src.model.algorithms import AlgorithmKind, AlgorithmSpec, init_states, stack, step
from gtvr.src.model.estimators import CounterStream, NodeState, saga_direction, svrg_direction
from gtvr.src.model.objectives import LogisticObjective, Objective, QuadraticObjective

logger = logging.getLogger("GTVR")

FD_STEP = 1e-6
FD_TOL = 1e-5
TRACKING_TOL = 1e-11
UNBIASED_TOL = 1e-13
TABLE_TOL = 1e-10

# Spectral gaps of uniform weights on 10 nodes: ring, exponential, complete.
REFERENCE_SIGMAS = {"ring": 0.9511, "exponential": 0.6, "complete": 0.0}


class SuiteFailure(AssertionError):
    pass


def _require(condition: bool, message: str):
    if not condition:
        raise SuiteFailure(message)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


@dataclass
class VerifyContext:
    """
    Shared inputs of the suites.

    Attributes:
        mixing_factory (Callable): Builds a ``MixingMatrix`` from a topology, called with the
            topology alone; swapped in tests to inject broken weights.
        seed (int): Seed of every random instance.
    """

    mixing_factory: Callable[[Topology], MixingMatrix] = build_mixing
    seed: int = 0

    def small_quadratic(self, n: int = 5, m: int = 8, p: int = 10) -> QuadraticObjective:
        return QuadraticObjective(synth_quadratic(n, [m] * n, p, self.seed))

    def small_logistic(self, n: int = 4, m: int = 6, p: int = 5, lam: float = 0.1):
        samples = synth_logistic(n * m, p, self.seed, 1.0)
        return LogisticObjective(partition(n * m, n).apply(samples), lam)


def check_double_stochasticity(ctx: VerifyContext) -> str:
    topologies = [build_ring(6), build_exponential(8), build_complete(5), build_geometric(8, 0.6, ctx.seed)]
    for t in topologies:
        mixing = ctx.mixing_factory(t)
        try:
            check_doubly_stochastic(mixing.W)
        except GTVRError as e:
            raise SuiteFailure(f"{t.kind} n={t.n}: {e}")
    return f"{len(topologies)} weight matrices"


def check_spectral_gap(ctx: VerifyContext) -> str:
    worst = 0.0
    for kind, builder in (("ring", build_ring), ("exponential", build_exponential), ("complete", build_complete)):
        mixing = ctx.mixing_factory(builder(10))
        J = np.full_like(mixing.W, 1.0 / mixing.n)
        exact = float(np.linalg.svd(mixing.W - J, compute_uv=False)[0])
        _require(abs(spectral_gap(mixing.W) - exact) <= 1e-8, f"{kind}: power iteration disagrees with SVD")
        worst = max(worst, abs(exact - REFERENCE_SIGMAS[kind]))
        _require(
            abs(exact - REFERENCE_SIGMAS[kind]) <= 1e-3,
            f"{kind}: sigma={exact:.4f}, expected {REFERENCE_SIGMAS[kind]}",
        )
    return f"max deviation {worst:.2e}"


def check_tracking_identity(ctx: VerifyContext, iterations: int = 500) -> str:
    objective = ctx.small_quadratic()
    W = ctx.mixing_factory(build_exponential(objective.n_nodes)).W
    worst = 0.0
    for kind in (AlgorithmKind.GT_SAGA, AlgorithmKind.GT_SVRG, AlgorithmKind.GT_DSGD):
        spec = AlgorithmSpec(kind=kind, alpha=0.05, svrg_T=20)
        states = init_states(objective, kind)
        stream = CounterStream(ctx.seed)
        for k in range(iterations):
            states, _ = step(spec, W, states, objective, k, stream)
            dev = np.max(np.abs(stack(states, "y").mean(0) - stack(states, "r_prev").mean(0)))
            worst = max(worst, float(dev))
            _require(dev <= TRACKING_TOL, f"{kind.label}: |mean(y) - mean(r)| = {dev:.2e} at k={k + 1}")
    return f"max deviation {worst:.2e}"


def _random_frozen_state(objective: Objective, i: int, rng: np.random.Generator) -> NodeState:
    p, m_i = objective.dim, int(objective.counts[i])
    points = rng.standard_normal((m_i, p))
    table = np.stack([objective.component_grad(i, j, points[j]) for j in range(m_i)])
    tau = rng.standard_normal(p)
    zero = np.zeros(p)
    return NodeState(
        x=zero,
        y=zero,
        r_prev=zero,
        grad_table=table,
        table_avg=table.mean(axis=0),
        snapshot_x=tau,
        snapshot_batch_grad=objective.batch_grad(i, tau),
    )


def check_unbiasedness(ctx: VerifyContext, trials: int = 50) -> str:
    rng = np.random.default_rng(ctx.seed)
    worst = 0.0
    for t, objective in enumerate([ctx.small_quadratic(), ctx.small_logistic()] * (trials // 2)):
        i = t % objective.n_nodes
        state = _random_frozen_state(objective, i, rng)
        x = rng.standard_normal(objective.dim)
        target = objective.batch_grad(i, x)
        scale = max(1.0, float(np.linalg.norm(target)))
        m_i = int(objective.counts[i])
        for direction in (saga_direction, svrg_direction):
            mean = np.mean([direction(state, objective, i, j, x) for j in range(m_i)], axis=0)
            err = float(np.linalg.norm(mean - target)) / scale
            worst = max(worst, err)
            _require(err <= UNBIASED_TOL, f"{direction.__name__}: relative error {err:.2e}")
    return f"{trials} frozen states, max relative error {worst:.2e}"


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    grad = np.zeros_like(x)
    for d in range(x.size):
        e = np.zeros_like(x)
        e[d] = h
        grad[d] = (f(x + e) - f(x - e)) / (2 * h)
    return grad


def check_finite_differences(ctx: VerifyContext, points: int = 100) -> str:
    rng = np.random.default_rng(ctx.seed)
    objectives = [ctx.small_quadratic(), ctx.small_logistic()]
    worst = 0.0
    for t in range(points):
        objective = objectives[t % 2]
        i = int(rng.integers(objective.n_nodes))
        j = int(rng.integers(objective.counts[i]))
        x = rng.standard_normal(objective.dim)
        numeric = central_difference(lambda z: objective.component_value(i, j, z), x)
        analytic = objective.component_grad(i, j, x)
        err = float(np.linalg.norm(numeric - analytic) / max(1.0, np.linalg.norm(analytic)))
        worst = max(worst, err)
        _require(err <= FD_TOL, f"{objective.name} component ({i}, {j}): relative error {err:.2e}")
    return f"{points} points, max relative error {worst:.2e}"


def check_saga_table(ctx: VerifyContext, iterations: int = 300) -> str:
    objective = ctx.small_logistic()
    W = ctx.mixing_factory(build_ring(objective.n_nodes)).W
    spec = AlgorithmSpec(kind=AlgorithmKind.GT_SAGA, alpha=0.1)
    states = init_states(objective, spec.kind)
    stream = CounterStream(ctx.seed)
    worst = 0.0
    for k in range(iterations):
        states, _ = step(spec, W, states, objective, k, stream)
        for s in states:
            exact = s.grad_table.mean(axis=0)
            err = float(np.linalg.norm(s.table_avg - exact) / max(1e-300, np.linalg.norm(exact)))
            worst = max(worst, err)
            _require(err <= TABLE_TOL, f"running table average drifted by {err:.2e} at k={k + 1}")
    return f"max relative drift {worst:.2e}"


def check_determinism(ctx: VerifyContext, iterations: int = 100) -> str:
    objective = ctx.small_quadratic()
    W = ctx.mixing_factory(build_exponential(objective.n_nodes)).W
    spec = AlgorithmSpec(kind=AlgorithmKind.GT_SVRG, alpha=0.05, svrg_T=15)

    def trajectory(pool):
        states = init_states(objective, spec.kind)
        stream = CounterStream(ctx.seed)
        for k in range(iterations):
            states, _ = step(spec, W, states, objective, k, stream, pool)
        return stack(states, "x")

    serial = trajectory(None)
    with ThreadPoolExecutor(max_workers=4) as pool:
        threaded = trajectory(pool)
    _require(np.array_equal(serial, threaded), "threaded run differs from serial run")
    return "serial and 4-thread runs are bitwise equal"


def check_gradient_counts(ctx: VerifyContext, iterations: int = 45, T: int = 10) -> str:
    objective = ctx.small_quadratic()
    W = ctx.mixing_factory(build_exponential(objective.n_nodes)).W
    m = objective.counts
    expected = {
        AlgorithmKind.GT_SAGA: m + iterations,
        AlgorithmKind.GT_SVRG: m + 2 * iterations + m * (iterations // T),
        AlgorithmKind.GT_DSGD: m + iterations,
        AlgorithmKind.DSGD: np.full_like(m, iterations),
        AlgorithmKind.DSA: m + iterations,
        AlgorithmKind.DAVRG: m + 2 * iterations + m * (iterations // T),
    }
    for kind, counts in expected.items():
        spec = AlgorithmSpec(kind=kind, alpha=0.05, svrg_T=T)
        states = init_states(objective, kind)
        stream = CounterStream(ctx.seed)
        for k in range(iterations):
            states, _ = step(spec, W, states, objective, k, stream)
        got = np.array([s.grad_evals for s in states])
        _require(np.array_equal(got, counts), f"{kind.label}: counted {got.tolist()}, expected {counts.tolist()}")
    return f"{len(expected)} algorithms"


def check_partition(ctx: VerifyContext) -> str:
    rng = np.random.default_rng(ctx.seed)
    for _ in range(50):
        n = int(rng.integers(1, 20))
        N = int(rng.integers(n, 500))
        counts = partition(N, n).counts
        _require(sum(counts) == N, f"partition of {N} over {n} loses samples")
        _require(max(counts) - min(counts) <= 1, f"uneven partition {counts}")
    samples = synth_logistic(30, 3, ctx.seed, 1.0)
    parts = partition(30, 4, [0.1, 0.2, 0.3, 0.4], shuffle_seed=ctx.seed).apply(samples)
    merged = Dataset.concat(parts)
    _require(
        sorted(map(tuple, merged.features.tolist())) == sorted(map(tuple, samples.features.tolist())),
        "proportional partition does not cover the dataset exactly once",
    )
    return "50 even splits and one proportional split"


SUITES: Dict[str, Callable[[VerifyContext], str]] = {
    "double stochasticity": check_double_stochasticity,
    "spectral gap": check_spectral_gap,
    "tracking identity": check_tracking_identity,
    "estimator unbiasedness": check_unbiasedness,
    "finite-difference gradients": check_finite_differences,
    "SAGA table consistency": check_saga_table,
    "determinism": check_determinism,
    "gradient counts": check_gradient_counts,
    "partition": check_partition,
}


def run_suites(ctx: VerifyContext = None, names: List[str] = None) -> List[SuiteResult]:
    ctx = ctx or VerifyContext()
    results = []
    for name, suite in SUITES.items():
        if names is not None and name not in names:
            continue
        try:
            detail = suite(ctx)
            results.append(SuiteResult(name=name, passed=True, detail=detail))
        except (SuiteFailure, GTVRError, FloatingPointError) as e:
            logger.error(f"❌ {name}: {e}")
            results.append(SuiteResult(name=name, passed=False, detail=str(e)))
        except Exception as e:
            logger.exception(f"❌ {name} crashed")
            results.append(SuiteResult(name=name, passed=False, detail=f"{type(e).__name__}: {e}"))
    return results


def results_table(results: List[SuiteResult]) -> PrettyTable:
    table = PrettyTable()
    table.field_names = ["suite", "status", "detail"]
    table.align["detail"] = "l"
    for r in results:
        table.add_row([r.name, "PASS" if r.passed else "FAIL", r.detail])
    return table
