import logging
from abc import ABC, abstractmethod
from typing import List, Sequence, Tuple

import numpy as np

from gtvr.src.data.datasets import Dataset
from gtvr.src.exceptions import DimensionError, StrongConvexityError

logger = logging.getLogger("GTVR")

# Upper bound of the logistic loss curvature s(1 - s).
LOGISTIC_CURVATURE = 0.25


def _check_dims(a: np.ndarray, x: np.ndarray):
    if a.shape[-1] != x.shape[-1]:
        raise DimensionError(f"Dimension mismatch: {a.shape[-1]} vs {x.shape[-1]}")


def neg_sigmoid(z):
    """``1 / (1 + exp(z))`` evaluated without overflow, branching on the sign of ``z``."""
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, e / (1.0 + e), 1.0 / (1.0 + e))


def logistic_component(
    features: np.ndarray, label: float, lam: float, x: np.ndarray
) -> Tuple[float, np.ndarray]:
    """
    Value and gradient of ``log(1 + exp(-label x^T theta)) + (lam / 2) ||x||^2``.

    Args:
        features (np.ndarray): Feature vector ``theta``.
        label (float): ``+1`` or ``-1``.
        lam (float): Ridge weight.
        x (np.ndarray): Evaluation point.

    Returns:
        Tuple[float, np.ndarray]: ``(value, gradient)``.
    """
    _check_dims(features, x)
    z = label * float(features @ x)
    value = float(np.logaddexp(0.0, -z)) + 0.5 * lam * float(x @ x)
    grad = -label * float(neg_sigmoid(z)) * features + lam * x
    return value, grad


def quadratic_component(center: np.ndarray, x: np.ndarray) -> Tuple[float, np.ndarray]:
    """Value and gradient of ``0.5 ||x - center||^2``."""
    _check_dims(center, x)
    diff = x - center
    return 0.5 * float(diff @ diff), diff


def constants_logistic(samples: Dataset, lam: float) -> Tuple[float, float, float]:
    """
    Strong convexity, smoothness and condition number of the regularized logistic cost.

    ``mu = lam`` and ``L = lam + max ||theta||^2 / 4``, which is ``lam + 1/4`` on unit-norm
    features.
    """
    if lam is None or lam <= 0:
        raise StrongConvexityError(f"The logistic cost needs lam > 0 to be strongly convex, got {lam}")
    radius_sq = float(np.max(np.einsum("ij,ij->i", samples.features, samples.features)))
    mu = float(lam)
    L = mu + LOGISTIC_CURVATURE * radius_sq
    return mu, L, L / mu


class Objective(ABC):
    """
    Finite sum ``F(x) = (1/n) sum_i f_i(x)`` with ``f_i = (1/m_i) sum_j f_ij``.

    Algorithms only see the oracles below, never the data.
    """

    name = "objective"

    def __init__(self, counts: Sequence[int], dim: int, mu: float, L: float):
        self.counts = np.asarray(counts, dtype=int)
        self.dim = int(dim)
        self.mu = float(mu)
        self.L = float(L)

    @property
    def n_nodes(self) -> int:
        return len(self.counts)

    @property
    def Q(self) -> float:
        return self.L / self.mu

    @property
    def M(self) -> int:
        return int(self.counts.max())

    @property
    def m(self) -> int:
        return int(self.counts.min())

    @abstractmethod
    def component_value(self, i: int, j: int, x: np.ndarray) -> float:
        pass

    @abstractmethod
    def component_grad(self, i: int, j: int, x: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def component_grads(self, i: int, x: np.ndarray) -> np.ndarray:
        """All ``m_i`` component gradients of node ``i`` at ``x``, stacked row-wise."""

    @abstractmethod
    def local_values(self, i: int, X: np.ndarray) -> np.ndarray:
        """``f_i`` at each row of ``X``."""

    @abstractmethod
    def merged(self) -> "Objective":
        """The same finite sum with every component moved onto a single node."""

    def batch_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.component_grads(i, x).mean(axis=0)

    def local_value(self, i: int, x: np.ndarray) -> float:
        return float(self.local_values(i, np.atleast_2d(x))[0])

    def values(self, X: np.ndarray) -> np.ndarray:
        """``F`` at each row of ``X``."""
        X = np.atleast_2d(X)
        return np.mean([self.local_values(i, X) for i in range(self.n_nodes)], axis=0)

    def value(self, x: np.ndarray) -> float:
        return float(self.values(x)[0])

    def full_grad(self, x: np.ndarray) -> np.ndarray:
        return np.mean([self.batch_grad(i, x) for i in range(self.n_nodes)], axis=0)

    def gaps(self, X: np.ndarray, x_star: np.ndarray, f_star: float) -> np.ndarray:
        """``F(x) - F(x*)`` at each row of ``X``."""
        return self.values(X) - f_star

    def describe(self) -> dict:
        return {
            "name": self.name,
            "n_nodes": self.n_nodes,
            "dim": self.dim,
            "counts": self.counts.tolist(),
            "mu": self.mu,
            "L": self.L,
            "Q": self.Q,
        }


class LogisticObjective(Objective):
    """Ridge-regularized logistic regression, one dataset per node."""

    name = "logistic"

    def __init__(self, node_sets: List[Dataset], lam: float):
        self.node_sets = node_sets
        self.lam = float(lam)
        mu, L, _ = constants_logistic(Dataset.concat(node_sets), lam)
        super().__init__([len(d) for d in node_sets], node_sets[0].dim, mu, L)

    def _logits(self, i: int, X: np.ndarray) -> np.ndarray:
        data = self.node_sets[i]
        _check_dims(data.features, X)
        return data.labels[:, None] * (data.features @ X.T)

    def component_value(self, i, j, x):
        data = self.node_sets[i]
        return logistic_component(data.features[j], data.labels[j], self.lam, x)[0]

    def component_grad(self, i, j, x):
        data = self.node_sets[i]
        return logistic_component(data.features[j], data.labels[j], self.lam, x)[1]

    def component_grads(self, i, x):
        data = self.node_sets[i]
        _check_dims(data.features, x)
        weights = -data.labels * neg_sigmoid(data.labels * (data.features @ x))
        return weights[:, None] * data.features + self.lam * x[None, :]

    def local_values(self, i, X):
        X = np.atleast_2d(X)
        loss = np.logaddexp(0.0, -self._logits(i, X)).mean(axis=0)
        return loss + 0.5 * self.lam * np.einsum("ij,ij->i", X, X)

    def merged(self) -> "LogisticObjective":
        return LogisticObjective([Dataset.concat(self.node_sets)], self.lam)

    def describe(self) -> dict:
        return {**super().describe(), "lam": self.lam}


class QuadraticObjective(Objective):
    """Components ``0.5 ||x - c_ij||^2``; ``mu = L = 1`` and the minimizer is known exactly."""

    name = "quadratic"

    def __init__(self, centers: List[np.ndarray]):
        self.centers = [np.atleast_2d(np.asarray(c, dtype=float)) for c in centers]
        super().__init__([c.shape[0] for c in self.centers], self.centers[0].shape[1], 1.0, 1.0)

    def component_value(self, i, j, x):
        return quadratic_component(self.centers[i][j], x)[0]

    def component_grad(self, i, j, x):
        return quadratic_component(self.centers[i][j], x)[1]

    def component_grads(self, i, x):
        _check_dims(self.centers[i], x)
        return x[None, :] - self.centers[i]

    def local_values(self, i, X):
        X = np.atleast_2d(X)
        _check_dims(self.centers[i], X)
        diff = X[:, None, :] - self.centers[i][None, :, :]
        return 0.5 * np.einsum("kjp,kjp->kj", diff, diff).mean(axis=1)

    def minimizer(self) -> np.ndarray:
        return np.mean([c.mean(axis=0) for c in self.centers], axis=0)

    def gaps(self, X, x_star, f_star):
        # F has identity Hessian, so the gap is exact without cancellation.
        diff = np.atleast_2d(X) - x_star[None, :]
        return 0.5 * np.einsum("ij,ij->i", diff, diff)

    def merged(self) -> "QuadraticObjective":
        return QuadraticObjective([np.concatenate(self.centers)])
