from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from gtvr.src.data.datasets import Dataset
from gtvr.src.exceptions import PartitionError

PROPORTION_TOL = 1e-9


@dataclass(frozen=True)
class Partition:
    """
    Contiguous split of ``N`` samples over ``n`` nodes.

    Attributes:
        ranges (Tuple[Tuple[int, int], ...]): Half-open ``[start, stop)`` range per node.
        order (Optional[np.ndarray]): Permutation applied before splitting, ``None`` keeps
            the original order.
    """

    ranges: Tuple[Tuple[int, int], ...]
    order: Optional[Tuple[int, ...]] = None

    @property
    def counts(self) -> List[int]:
        return [stop - start for start, stop in self.ranges]

    @property
    def M(self) -> int:
        return max(self.counts)

    @property
    def m(self) -> int:
        return min(self.counts)

    @property
    def n(self) -> int:
        return len(self.ranges)

    @property
    def total(self) -> int:
        return self.ranges[-1][1]

    def indices(self, node: int) -> np.ndarray:
        start, stop = self.ranges[node]
        if self.order is None:
            return np.arange(start, stop)
        return np.asarray(self.order[start:stop], dtype=int)

    def apply(self, samples: Dataset) -> List[Dataset]:
        """Split ``samples`` into one dataset per node."""
        if len(samples) != self.total:
            raise PartitionError(f"Partition covers {self.total} samples, dataset has {len(samples)}")
        return [samples.subset(self.indices(i)) for i in range(self.n)]

    def split_array(self, values: np.ndarray) -> List[np.ndarray]:
        return [np.asarray(values)[self.indices(i)].copy() for i in range(self.n)]


def _even_counts(N: int, n: int) -> List[int]:
    base, extra = divmod(N, n)
    return [base + 1 if i < extra else base for i in range(n)]


def _proportional_counts(N: int, proportions: Sequence[float]) -> List[int]:
    proportions = np.asarray(proportions, dtype=float)
    if np.any(proportions <= 0):
        raise PartitionError("Proportions must all be positive")
    if abs(proportions.sum() - 1.0) > PROPORTION_TOL:
        raise PartitionError(f"Proportions sum to {proportions.sum()!r}, not 1")
    counts = [int(np.floor(N * p + 0.5)) for p in proportions]
    counts[int(np.argmax(proportions))] += N - sum(counts)
    return counts


def partition(
    N: int,
    n: int,
    mode: Union[str, Sequence[float]] = "even",
    shuffle_seed: Optional[int] = None,
) -> Partition:
    """
    Assign ``N`` samples to ``n`` nodes as contiguous index ranges.

    Args:
        N (int): Number of samples.
        n (int): Number of nodes.
        mode (Union[str, Sequence[float]]): ``"even"`` (counts differ by at most one, extra
            samples go to the first nodes) or a list of positive proportions summing to one
            (``round(N p_i)`` each, remainder to the largest-proportion node).
        shuffle_seed (Optional[int]): Permute samples with this seed before splitting.

    Returns:
        Partition: The node ranges.
    """
    if n < 1:
        raise PartitionError(f"Need at least one node, got {n}")
    if N < n:
        raise PartitionError(f"Cannot split {N} samples over {n} nodes")
    if isinstance(mode, str):
        if mode != "even":
            raise PartitionError(f"Unknown partition mode '{mode}'")
        counts = _even_counts(N, n)
    else:
        if len(mode) != n:
            raise PartitionError(f"Got {len(mode)} proportions for {n} nodes")
        counts = _proportional_counts(N, mode)
    if min(counts) < 1:
        raise PartitionError(f"Partition leaves a node without samples: {counts}")
    bounds = np.concatenate([[0], np.cumsum(counts)]).astype(int).tolist()
    ranges = tuple((bounds[i], bounds[i + 1]) for i in range(n))
    order = None
    if shuffle_seed is not None:
        order = tuple(np.random.default_rng(shuffle_seed).permutation(N).tolist())
    return Partition(ranges=ranges, order=order)
