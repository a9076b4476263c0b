import logging
from concurrent.futures import Executor
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from gtvr.src.exceptions import ConfigError, DimensionError, PreconditionError
from gtvr.src.model.estimators import (
    CounterStream,
    NodeState,
    saga_estimator,
    sgd_estimator,
    svrg_estimator,
)
from gtvr.src.model.objectives import Objective

logger = logging.getLogger("GTVR")

SCHEDULES = ("constant", "inverse")


class AlgorithmKind(str, Enum):
    GT_SAGA = "gt_saga"
    GT_SVRG = "gt_svrg"
    GT_DSGD = "gt_dsgd"
    DSGD = "dsgd"
    DSA = "dsa"
    DAVRG = "davrg"

    @property
    def tracks_gradient(self) -> bool:
        return self in (AlgorithmKind.GT_SAGA, AlgorithmKind.GT_SVRG, AlgorithmKind.GT_DSGD)

    @property
    def variance_reduced(self) -> bool:
        return self.estimator != "sgd"

    @property
    def estimator(self) -> str:
        if self in (AlgorithmKind.GT_SAGA, AlgorithmKind.DSA):
            return "saga"
        if self in (AlgorithmKind.GT_SVRG, AlgorithmKind.DAVRG):
            return "svrg"
        return "sgd"

    @property
    def needs_symmetric_weights(self) -> bool:
        return self in (AlgorithmKind.DSA, AlgorithmKind.DAVRG)

    @property
    def label(self) -> str:
        return {
            AlgorithmKind.GT_SAGA: "GT-SAGA",
            AlgorithmKind.GT_SVRG: "GT-SVRG",
            AlgorithmKind.GT_DSGD: "GT-DSGD",
            AlgorithmKind.DSGD: "DSGD",
            AlgorithmKind.DSA: "DSA",
            AlgorithmKind.DAVRG: "DAVRG",
        }[self]


@dataclass(frozen=True)
class AlgorithmSpec:
    """
    Algorithm choice and its step-size.

    Attributes:
        kind (AlgorithmKind): Which recursion to run.
        alpha (float): Base step-size, strictly positive.
        svrg_T (Optional[int]): Inner-loop length, required by the SVRG-estimator kinds.
        schedule (str): ``constant`` or ``inverse`` (``alpha / (1 + k / k0)``); the
            variance-reduced methods only accept ``constant``.
        k0 (float): Decay horizon of the ``inverse`` schedule.
    """

    kind: AlgorithmKind
    alpha: float
    svrg_T: Optional[int] = None
    schedule: str = "constant"
    k0: float = 1000.0

    def __post_init__(self):
        object.__setattr__(self, "kind", AlgorithmKind(self.kind))
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise ConfigError(f"alpha must be > 0, got {self.alpha}", field="algorithm.alpha")
        if self.kind.estimator == "svrg" and (self.svrg_T is None or self.svrg_T < 1):
            raise ConfigError(
                f"{self.kind.label} needs svrg_T >= 1, got {self.svrg_T}", field="algorithm.svrg_T"
            )
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"Unknown schedule '{self.schedule}'", field="algorithm.schedule")
        if self.schedule != "constant" and self.kind.variance_reduced:
            raise ConfigError(
                f"{self.kind.label} runs with a constant step-size only",
                field="algorithm.schedule",
            )
        if self.k0 <= 0:
            raise ConfigError(f"k0 must be > 0, got {self.k0}", field="algorithm.k0")

    def step_size(self, k: int) -> float:
        if self.schedule == "inverse":
            return self.alpha / (1.0 + k / self.k0)
        return self.alpha


def mix(W: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Row ``i`` of the result is ``sum_r W[i, r] V[r]``."""
    W = np.asarray(W)
    V = np.asarray(V)
    if V.ndim != 2 or W.shape[1] != V.shape[0]:
        raise DimensionError(f"Cannot mix {V.shape} node vectors with a {W.shape} matrix")
    return W @ V


def _shared_start(objective: Objective, x0) -> np.ndarray:
    n, p = objective.n_nodes, objective.dim
    if x0 is None:
        return np.zeros((n, p))
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        x0 = np.tile(x0, (n, 1))
    if x0.shape != (n, p):
        raise DimensionError(f"Initial point has shape {x0.shape}, expected ({n}, {p})")
    return x0


def init_states(objective: Objective, kind: AlgorithmKind, x0=None) -> List[NodeState]:
    """
    Initial node states at ``x0``.

    ``x0`` is shared (a vector) or per node (``n x p``); ``None`` means the origin. The SAGA
    table is filled at ``x0`` and the SVRG snapshot is ``x0`` itself, each at the cost of
    ``m_i`` evaluations. Tracking kinds start with ``y = r_prev`` equal to the local estimate
    at ``x0``; DSGD, DSA and DAVRG keep no tracker.
    """
    kind = AlgorithmKind(kind)
    X0 = _shared_start(objective, x0)
    states = []
    for i in range(objective.n_nodes):
        x = X0[i].copy()
        m_i = int(objective.counts[i])
        if kind is AlgorithmKind.DSGD:
            zero = np.zeros_like(x)
            states.append(NodeState(x=x, y=zero, r_prev=zero.copy()))
            continue
        if kind.estimator == "saga":
            table = np.array(objective.component_grads(i, x), dtype=float)
            avg = table.mean(axis=0)
            state = NodeState(x=x, y=avg.copy(), r_prev=avg.copy(), grad_table=table, table_avg=avg)
        elif kind.estimator == "svrg":
            batch = objective.batch_grad(i, x)
            state = NodeState(
                x=x, y=batch.copy(), r_prev=batch.copy(), snapshot_x=x.copy(), snapshot_batch_grad=batch
            )
        else:
            batch = objective.batch_grad(i, x)
            state = NodeState(x=x, y=batch.copy(), r_prev=batch.copy())
        if not kind.tracks_gradient:
            state.y = np.zeros_like(x)
        if kind is AlgorithmKind.DAVRG:
            state.psi = x.copy()
        state.grad_evals = m_i
        states.append(state)
    return states


def stack(states: List[NodeState], attr: str) -> np.ndarray:
    return np.stack([getattr(s, attr) for s in states])


def check_symmetric_weights(kind: AlgorithmKind, W: np.ndarray, tol: float = 1e-12):
    """DSA and DAVRG average with ``(I + W) / 2`` and need ``W = W^T``."""
    if AlgorithmKind(kind).needs_symmetric_weights and not np.allclose(W, W.T, rtol=0.0, atol=tol):
        raise PreconditionError(f"{AlgorithmKind(kind).label} needs a symmetric mixing matrix")


def _node_estimate(spec, objective, state, i, j, x_new, k):
    if spec.kind.estimator == "saga":
        return saga_estimator(state, objective, i, j, x_new)
    if spec.kind.estimator == "svrg":
        return svrg_estimator(state, objective, i, j, x_new, k, spec.svrg_T)
    return sgd_estimator(state, objective, i, j, x_new)


def _corrected_step(spec, W, states, objective, k, draws, alpha, pool):
    """
    DSA and DAVRG: a bias-corrected diffusion driven by the estimate at the current iterate.

    DSA runs ``x+ = (I + W) x - W~ x_prev - alpha (g - g_prev)`` after a plain first step
    ``x1 = W x0 - alpha g0``; DAVRG runs ``psi+ = x - alpha g``, ``x+ = W~ (psi+ + x - psi)``.
    ``W~ = (I + W) / 2``.
    """
    X = stack(states, "x")

    def update(i):
        g, _ = _node_estimate(spec, objective, states[i], i, int(draws[i]), X[i], k)
        return g

    G = np.stack(_map(pool, update, range(len(states))))
    if spec.kind is AlgorithmKind.DSA:
        if states[0].x_prev is None:
            X_new = mix(W, X) - alpha * G
        else:
            X_prev = stack(states, "x_prev")
            G_prev = stack(states, "r_prev")
            X_new = X + mix(W, X) - 0.5 * (X_prev + mix(W, X_prev)) - alpha * (G - G_prev)
        for i, state in enumerate(states):
            state.x_prev = X[i].copy()
    else:
        Psi_new = X - alpha * G
        Phi = Psi_new + X - stack(states, "psi")
        X_new = 0.5 * (Phi + mix(W, Phi))
        for i, state in enumerate(states):
            state.psi = Psi_new[i].copy()
    for i, state in enumerate(states):
        state.x = X_new[i].copy()
        state.r_prev = G[i].copy()
    return states


def step(
    spec: AlgorithmSpec,
    W: np.ndarray,
    states: List[NodeState],
    objective: Objective,
    k: int,
    stream: CounterStream,
    pool: Optional[Executor] = None,
) -> Tuple[List[NodeState], np.ndarray]:
    """
    One synchronous round ``k -> k + 1``.

    Gradient-tracking kinds run ``x <- Wx - alpha y``, draw one component per node, evaluate
    their estimator at the new ``x`` and set ``y <- Wy + r_new - r_prev``. DSGD runs
    ``x <- Wx - alpha grad f_{i,s}(x)`` with the gradient taken at the old iterate.
    DSA and DAVRG evaluate their estimator at the old iterate as well (see ``_corrected_step``).

    Mixing reads only the previous round's stacked iterates, so node updates are independent
    and may run on ``pool``; the result does not depend on its size.

    Returns:
        Tuple[List[NodeState], np.ndarray]: The updated states and per-node gradient
        evaluations spent in this round.
    """
    alpha = spec.step_size(k)
    before = np.array([s.grad_evals for s in states])
    X = stack(states, "x")
    draws = stream.sample_indices(k, objective.counts)
    X_mixed = mix(W, X)

    if spec.kind is AlgorithmKind.DSGD:

        def update(i):
            g, _ = sgd_estimator(states[i], objective, i, int(draws[i]), X[i])
            states[i].x = X_mixed[i] - alpha * g
            return g

        _map(pool, update, range(len(states)))
        return states, np.array([s.grad_evals for s in states]) - before

    if not spec.kind.tracks_gradient:
        states = _corrected_step(spec, W, states, objective, k, draws, alpha, pool)
        return states, np.array([s.grad_evals for s in states]) - before

    Y = stack(states, "y")
    R_prev = stack(states, "r_prev")
    X_new = X_mixed - alpha * Y

    def update(i):
        r, _ = _node_estimate(spec, objective, states[i], i, int(draws[i]), X_new[i], k)
        return r

    R_new = np.stack(_map(pool, update, range(len(states))))
    Y_new = mix(W, Y) + R_new - R_prev
    for i, state in enumerate(states):
        state.x = X_new[i].copy()
        state.y = Y_new[i].copy()
        state.r_prev = R_new[i].copy()
    return states, np.array([s.grad_evals for s in states]) - before


def _map(pool: Optional[Executor], fn, items):
    if pool is None:
        return [fn(i) for i in items]
    return list(pool.map(fn, items))


def estimator_variance(objective: Objective, states: List[NodeState]) -> float:
    """``sum_i ||r_i - grad f_i(x_i)||^2``, how far the estimators are from the local gradients."""
    return float(
        sum(
            np.sum((s.r_prev - objective.batch_grad(i, s.x)) ** 2) for i, s in enumerate(states)
        )
    )
