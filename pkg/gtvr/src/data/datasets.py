from dataclasses import dataclass
from typing import Iterator, List, NamedTuple, Sequence

import numpy as np

from gtvr.src.exceptions import DimensionError, NormalizationError

UNIT_NORM_TOL = 1e-12


class Sample(NamedTuple):
    features: np.ndarray
    label: float


@dataclass
class Dataset:
    """
    Dense binary-classification samples stored row-wise.

    Behaves as a sequence of ``Sample`` objects while keeping the feature matrix contiguous so
    oracles can work on whole node blocks.

    Attributes:
        features (np.ndarray): ``N x p`` feature matrix.
        labels (np.ndarray): ``N`` labels in ``{-1, +1}``.
    """

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float).reshape(-1)
        if self.features.shape[0] != self.labels.shape[0]:
            raise DimensionError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels"
            )

    def __len__(self) -> int:
        return self.labels.shape[0]

    def __getitem__(self, idx: int) -> Sample:
        return Sample(self.features[idx], float(self.labels[idx]))

    def __iter__(self) -> Iterator[Sample]:
        for idx in range(len(self)):
            yield self[idx]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        indices = np.asarray(indices, dtype=int)
        return Dataset(self.features[indices].copy(), self.labels[indices].copy())

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "Dataset":
        samples = list(samples)
        if not samples:
            raise DimensionError("Cannot build a dataset from zero samples")
        return cls(np.stack([s.features for s in samples]), np.array([s.label for s in samples]))

    @classmethod
    def concat(cls, parts: List["Dataset"]) -> "Dataset":
        return cls(
            np.concatenate([part.features for part in parts]),
            np.concatenate([part.labels for part in parts]),
        )


def normalize_unit(samples: Dataset) -> Dataset:
    """
    Scale every feature vector to unit Euclidean norm, labels untouched.

    Raises:
        NormalizationError: if a feature vector is zero; the error names its index.
    """
    norms = np.linalg.norm(samples.features, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise NormalizationError(
            f"Sample {int(zero[0])} has an all-zero feature vector", index=int(zero[0])
        )
    features = samples.features / norms[:, None]
    return Dataset(features, samples.labels.copy())


def has_unit_features(samples: Dataset, tol: float = UNIT_NORM_TOL) -> bool:
    return bool(np.all(np.abs(np.linalg.norm(samples.features, axis=1) - 1.0) <= tol))
