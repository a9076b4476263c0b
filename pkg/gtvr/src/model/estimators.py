from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from gtvr.src.model.objectives import Objective

# Exact resync of the SAGA running average every RESYNC_FACTOR * m_i table writes.
RESYNC_FACTOR = 10


@dataclass
class NodeState:
    """
    Everything node ``i`` keeps between rounds.

    Attributes:
        x (np.ndarray): Local estimate of the solution.
        y (np.ndarray): Gradient tracker (unused by DSGD).
        r_prev (np.ndarray): Estimator value of the previous round.
        grad_table (Optional[np.ndarray]): SAGA table of component gradients, ``m_i x p``.
        table_avg (Optional[np.ndarray]): Running mean of ``grad_table``.
        table_writes (int): SAGA table writes since initialization.
        snapshot_x (Optional[np.ndarray]): SVRG snapshot point ``tau``.
        snapshot_batch_grad (Optional[np.ndarray]): Local batch gradient at ``tau``.
        x_prev (Optional[np.ndarray]): Iterate of the previous round (DSA).
        psi (Optional[np.ndarray]): Previous adapt-step result (DAVRG).
        grad_evals (int): Component-gradient evaluations performed so far.
    """

    x: np.ndarray
    y: np.ndarray
    r_prev: np.ndarray
    grad_table: Optional[np.ndarray] = field(default=None, repr=False)
    table_avg: Optional[np.ndarray] = None
    table_writes: int = 0
    snapshot_x: Optional[np.ndarray] = None
    snapshot_batch_grad: Optional[np.ndarray] = None
    x_prev: Optional[np.ndarray] = None
    psi: Optional[np.ndarray] = None
    grad_evals: int = 0

    def to_dict(self) -> dict:
        def listed(a):
            return None if a is None else a.tolist()

        return {
            "x": listed(self.x),
            "y": listed(self.y),
            "r_prev": listed(self.r_prev),
            "grad_table": listed(self.grad_table),
            "table_avg": listed(self.table_avg),
            "table_writes": self.table_writes,
            "snapshot_x": listed(self.snapshot_x),
            "snapshot_batch_grad": listed(self.snapshot_batch_grad),
            "x_prev": listed(self.x_prev),
            "psi": listed(self.psi),
            "grad_evals": self.grad_evals,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NodeState":
        def arr(key):
            value = payload.get(key)
            return None if value is None else np.asarray(value, dtype=float)

        return cls(
            x=arr("x"),
            y=arr("y"),
            r_prev=arr("r_prev"),
            grad_table=arr("grad_table"),
            table_avg=arr("table_avg"),
            table_writes=int(payload.get("table_writes", 0)),
            snapshot_x=arr("snapshot_x"),
            snapshot_batch_grad=arr("snapshot_batch_grad"),
            x_prev=arr("x_prev"),
            psi=arr("psi"),
            grad_evals=int(payload.get("grad_evals", 0)),
        )


class CounterStream:
    """
    Counter-based randomness keyed by ``(seed, iteration, node)``.

    Round ``k`` reads the Philox block starting at counter ``k << 64``; node ``i`` takes the
    ``i``-th double of that block. A draw therefore never depends on which other nodes drew
    or in which order, and can be replayed from ``(seed, node, k)`` alone.
    """

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError(f"Seed must be non-negative, got {seed}")
        self.seed = int(seed)

    def uniforms(self, k: int, count: int) -> np.ndarray:
        bit_generator = np.random.Philox(key=self.seed, counter=int(k) << 64)
        return np.random.Generator(bit_generator).random(count)

    def sample_indices(self, k: int, counts: Sequence[int]) -> np.ndarray:
        """0-based component index per node for round ``k``."""
        counts = np.asarray(counts, dtype=int)
        draws = np.floor(self.uniforms(k, len(counts)) * counts).astype(int)
        return np.minimum(draws, counts - 1)


def sample_index(stream: CounterStream, i: int, k: int, m_i: int) -> int:
    """Uniform 0-based index in ``{0, ..., m_i - 1}`` for node ``i`` at round ``k``."""
    u = stream.uniforms(k, i + 1)[i]
    return min(int(np.floor(u * m_i)), m_i - 1)


def saga_direction(state: NodeState, objective: Objective, i: int, j: int, x: np.ndarray):
    """SAGA estimate at ``x`` from the current table, without touching the table."""
    return objective.component_grad(i, j, x) - state.grad_table[j] + state.table_avg


def saga_estimator(
    state: NodeState, objective: Objective, i: int, j: int, x_new: np.ndarray
) -> Tuple[np.ndarray, NodeState]:
    """
    SAGA estimate at ``x_new``, then overwrite table slot ``j`` with the fresh gradient.

    The running average is updated in O(p) and recomputed exactly every
    ``RESYNC_FACTOR * m_i`` writes. One component evaluation per call.
    """
    fresh = objective.component_grad(i, j, x_new)
    old = state.grad_table[j]
    g = fresh - old + state.table_avg
    m_i = state.grad_table.shape[0]
    state.table_avg = state.table_avg + (fresh - old) / m_i
    state.grad_table[j] = fresh
    state.table_writes += 1
    if state.table_writes % (RESYNC_FACTOR * m_i) == 0:
        state.table_avg = state.grad_table.mean(axis=0)
    state.grad_evals += 1
    return g, state


def svrg_direction(state: NodeState, objective: Objective, i: int, j: int, x: np.ndarray):
    """SVRG estimate at ``x`` from the current snapshot."""
    return (
        objective.component_grad(i, j, x)
        - objective.component_grad(i, j, state.snapshot_x)
        + state.snapshot_batch_grad
    )


def refresh_snapshot(state: NodeState, objective: Objective, i: int, x: np.ndarray):
    state.snapshot_x = x.copy()
    state.snapshot_batch_grad = objective.batch_grad(i, x)
    state.grad_evals += int(objective.counts[i])


def svrg_estimator(
    state: NodeState, objective: Objective, i: int, j: int, x_new: np.ndarray, k: int, T: int
) -> Tuple[np.ndarray, NodeState]:
    """
    SVRG estimate at ``x_new`` for round ``k``.

    When ``(k + 1) mod T == 0`` the snapshot moves to ``x_new`` first (``m_i`` evaluations);
    the estimate itself costs two component evaluations.
    """
    if (k + 1) % T == 0:
        refresh_snapshot(state, objective, i, x_new)
    v = svrg_direction(state, objective, i, j, x_new)
    state.grad_evals += 2
    return v, state


def sgd_estimator(
    state: NodeState, objective: Objective, i: int, j: int, x: np.ndarray
) -> Tuple[np.ndarray, NodeState]:
    state.grad_evals += 1
    return objective.component_grad(i, j, x), state


def states_to_dict(states: List[NodeState]) -> List[dict]:
    return [state.to_dict() for state in states]


def states_from_dict(payload: List[dict]) -> List[NodeState]:
    return [NodeState.from_dict(item) for item in payload]
