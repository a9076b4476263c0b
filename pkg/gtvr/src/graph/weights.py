import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from gtvr.src.exceptions import PreconditionError, SpectralError, WeightError
from gtvr.src.graph.topology import Topology

logger = logging.getLogger("GTVR")

STOCHASTIC_TOL = 1e-12
SPECTRAL_TOL = 1e-10

WEIGHT_RULES = ("uniform", "metropolis", "auto")


@dataclass(frozen=True)
class MixingMatrix:
    """
    Doubly stochastic weight matrix with its consensus contraction factor.

    Attributes:
        W (np.ndarray): ``n x n`` weights, ``W[i, r]`` is what node ``i`` applies to node ``r``.
        sigma (float): Spectral norm of ``W - (1/n) 11^T``.
        kind (str): Topology kind the weights were built for.
        rule (str): Weight rule, ``uniform`` or ``metropolis``.
    """

    W: np.ndarray = field(repr=False)
    sigma: float
    kind: str = "custom"
    rule: str = "uniform"
    topology: Optional[Topology] = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.W.shape[0]

    def to_dict(self) -> dict:
        edges = self.topology.sorted_edges() if self.topology is not None else []
        return {
            "n": self.n,
            "kind": self.kind,
            "rule": self.rule,
            "edges": edges,
            "weights": self.W.tolist(),
            "sigma": self.sigma,
        }


def check_doubly_stochastic(W: np.ndarray, tol: float = STOCHASTIC_TOL):
    """Raise ``PreconditionError`` unless ``W`` is a nonnegative doubly stochastic matrix."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise PreconditionError(f"Mixing matrix must be square, got shape {W.shape}")
    if np.any(W < 0):
        raise PreconditionError("Mixing matrix has negative entries")
    row_dev = np.abs(W.sum(axis=1) - 1.0)
    col_dev = np.abs(W.sum(axis=0) - 1.0)
    if row_dev.max() > tol:
        raise PreconditionError(
            f"Row {int(row_dev.argmax())} sums to {W.sum(axis=1)[row_dev.argmax()]!r}, not 1"
        )
    if col_dev.max() > tol:
        raise PreconditionError(
            f"Column {int(col_dev.argmax())} sums to {W.sum(axis=0)[col_dev.argmax()]!r}, not 1"
        )


def spectral_gap(W: np.ndarray, tol: float = SPECTRAL_TOL, max_iter: Optional[int] = None) -> float:
    """
    Compute ``sigma = ||W - (1/n) 11^T||_2`` by power iteration.

    The iteration runs on ``A = (W - J)^T (W - J)`` with the Rayleigh quotient as eigenvalue
    estimate and stops once its relative change drops below ``tol``.

    Args:
        W (np.ndarray): Doubly stochastic matrix.
        tol (float): Relative tolerance on the eigenvalue estimate of ``A``.
        max_iter (Optional[int]): Iteration cap, ``max(100, 10 n^2)`` by default.

    Returns:
        float: The contraction factor sigma.
    """
    W = np.asarray(W, dtype=float)
    check_doubly_stochastic(W)
    n = W.shape[0]
    if n == 1:
        return 0.0
    D = W - np.full((n, n), 1.0 / n)
    A = D.T @ D
    if not np.any(np.abs(A) > 0.0):
        return 0.0
    max_iter = max(100, 10 * n * n) if max_iter is None else max_iter

    v = np.random.default_rng(0).standard_normal(n)
    v -= v.mean()
    v /= np.linalg.norm(v)
    estimate = float(v @ A @ v)
    for _ in range(max_iter):
        w = A @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        previous, estimate = estimate, float(v @ A @ v)
        if abs(estimate - previous) <= tol * max(abs(estimate), np.finfo(float).tiny):
            return float(np.sqrt(max(estimate, 0.0)))
    raise SpectralError(
        f"Power iteration did not reach relative tolerance {tol} within {max_iter} iterations"
    )


def uniform_weights(t: Topology) -> MixingMatrix:
    """
    ``W[i, r] = 1 / |in-neighborhood of i|`` for each sender ``r`` of ``i``, itself included.

    Every node needs matching in- and out-degrees; this holds for ring, exponential and
    complete graphs.
    """
    for node, (in_deg, out_deg) in t.degrees().items():
        if in_deg != out_deg:
            raise WeightError(
                f"Node {node} has in-degree {in_deg} but out-degree {out_deg}; "
                "uniform weights would not be doubly stochastic",
                node=node,
            )
    W = np.zeros((t.n, t.n))
    for i in range(t.n):
        senders = t.in_neighbors(i)
        W[i, senders] = 1.0 / len(senders)
    col_dev = np.abs(W.sum(axis=0) - 1.0)
    if col_dev.max() > STOCHASTIC_TOL:
        node = int(col_dev.argmax())
        raise WeightError(f"Uniform weights leave column {node} unbalanced", node=node)
    return MixingMatrix(W=W, sigma=spectral_gap(W), kind=t.kind, rule="uniform", topology=t)


def metropolis_weights(t: Topology) -> MixingMatrix:
    """
    Metropolis rule on an undirected topology.

    ``W[i, r] = 1 / (1 + max(deg_i, deg_r))`` for neighbors ``i != r`` with degrees counted
    without the self-loop; the diagonal takes the remainder of each row.
    """
    if not t.is_symmetric():
        raise WeightError("Metropolis weights need a symmetric (undirected) topology")
    degree = {i: d[0] for i, d in t.degrees(exclude_self=True).items()}
    W = np.zeros((t.n, t.n))
    for s, r in t.edges:
        if s != r:
            W[r, s] = 1.0 / (1.0 + max(degree[s], degree[r]))
    for i in range(t.n):
        W[i, i] = 1.0 - (W[i].sum() - W[i, i])
    return MixingMatrix(W=W, sigma=spectral_gap(W), kind=t.kind, rule="metropolis", topology=t)


def build_mixing(t: Topology, rule: str = "auto") -> MixingMatrix:
    """Apply ``rule``; ``auto`` picks Metropolis for geometric graphs and uniform otherwise."""
    if rule == "auto":
        rule = "metropolis" if t.kind == "geometric" else "uniform"
    if rule == "uniform":
        mixing = uniform_weights(t)
    elif rule == "metropolis":
        mixing = metropolis_weights(t)
    else:
        raise WeightError(f"Unknown weight rule '{rule}'. Use one of: {WEIGHT_RULES}.")
    logger.debug(f"🕸️ {rule} weights on {t.kind} graph (n={t.n}): sigma={mixing.sigma:.6f}")
    return mixing


def mixing_from_matrix(W: np.ndarray, kind: str = "custom") -> MixingMatrix:
    W = np.array(W, dtype=float)
    return MixingMatrix(W=W, sigma=spectral_gap(W), kind=kind, rule="explicit")
