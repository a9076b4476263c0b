import gzip
import io
import logging
import os
from typing import IO, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from gtvr.src.data.datasets import Dataset
from gtvr.src.exceptions import DimensionError, LabelError, ParseError

logger = logging.getLogger("GTVR")

# Recognized binary conventions, checked in order; the first containing all labels wins.
LABEL_CONVENTIONS = ({-1.0: -1.0, 1.0: 1.0}, {0.0: -1.0, 1.0: 1.0}, {1.0: -1.0, 2.0: 1.0})


LabelMap = Dict[float, float]


def label_mapping(raw: np.ndarray) -> LabelMap:
    """
    Raw-label to ``{-1, +1}`` mapping derived from a binary label set.

    ``{-1, +1}``, ``{0, 1}`` and ``{1, 2}`` are recognized directly; any other pair maps its
    smaller value to -1 and its larger value to +1.
    """
    distinct = set(np.unique(raw).tolist())
    if len(distinct) > 2:
        raise LabelError(f"Expected binary labels, found {len(distinct)} distinct values")
    for convention in LABEL_CONVENTIONS:
        if distinct <= set(convention):
            return dict(convention)
    if len(distinct) == 1:
        raise LabelError(f"Cannot place the single label {distinct.pop()} on a binary scale")
    low, high = sorted(distinct)
    return {low: -1.0, high: 1.0}


def map_labels(raw: np.ndarray, mapping: Optional[LabelMap] = None) -> np.ndarray:
    """
    Map raw binary labels onto ``{-1, +1}``.

    A held-out set must reuse the training ``mapping`` so a raw label keeps its sign.

    Raises:
        LabelError: if a label has no entry in ``mapping``.
    """
    if mapping is None:
        mapping = label_mapping(raw)
    unknown = sorted(set(np.unique(raw).tolist()) - set(mapping))
    if unknown:
        raise LabelError(f"Labels {unknown} do not appear in the training label set {sorted(mapping)}")
    return np.array([mapping[v] for v in raw.tolist()], dtype=float)


def _parse_line(line: str, line_number: int) -> Tuple[float, List[Tuple[int, float]]]:
    tokens = line.split()
    try:
        label = float(tokens[0])
    except ValueError:
        raise ParseError(f"invalid label '{tokens[0]}'", line_number)
    entries = []
    previous = 0
    for token in tokens[1:]:
        idx_text, sep, val_text = token.partition(":")
        if not sep:
            raise ParseError(f"expected <index>:<value>, got '{token}'", line_number)
        try:
            idx, val = int(idx_text), float(val_text)
        except ValueError:
            raise ParseError(f"malformed feature '{token}'", line_number)
        if idx <= previous:
            raise ParseError(
                f"feature indices must be 1-based and strictly increasing ('{token}')", line_number
            )
        previous = idx
        entries.append((idx, val))
    return label, entries


def _parse_rows(stream: Iterable[str], dim: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    labels, rows = [], []
    max_idx = 0
    for line_number, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        label, entries = _parse_line(line, line_number)
        if entries:
            last = entries[-1][0]
            if dim is not None and last > dim:
                raise DimensionError(f"line {line_number}: feature index {last} exceeds dimension {dim}")
            max_idx = max(max_idx, last)
        labels.append(label)
        rows.append(entries)
    if not rows:
        raise ParseError("no samples found")
    p = max_idx if dim is None else dim
    features = np.zeros((len(rows), max(p, 1)))
    for i, entries in enumerate(rows):
        for idx, val in entries:
            features[i, idx - 1] = val
    return np.array(labels, dtype=float), features


def parse_libsvm(
    stream: Iterable[str], dim: Optional[int] = None, label_map: Optional[LabelMap] = None
) -> Dataset:
    """
    Parse LIBSVM text into a dense dataset.

    Args:
        stream (Iterable[str]): Lines of ``<label> <idx>:<val> ...``; blank lines are skipped,
            LF and CRLF endings are both accepted.
        dim (Optional[int]): Feature dimension; ``None`` uses the largest index seen.
        label_map (Optional[LabelMap]): Raw-label mapping to apply; ``None`` derives one from
            the labels in ``stream``.

    Returns:
        Dataset: Dense samples with labels mapped onto ``{-1, +1}``.
    """
    raw, features = _parse_rows(stream, dim)
    return Dataset(features, map_labels(raw, label_map))


def write_libsvm(samples: Dataset, stream: IO[str]):
    """Write ``samples`` in LIBSVM format; values are written with round-trip precision."""
    for features, label in zip(samples.features, samples.labels):
        head = "+1" if label > 0 else "-1"
        body = " ".join(f"{j + 1}:{v!r}" for j, v in enumerate(features.tolist()) if v != 0.0)
        stream.write(f"{head} {body}\n" if body else f"{head}\n")


def load_libsvm(
    path: Union[str, os.PathLike], dim: Optional[int] = None, label_map: Optional[LabelMap] = None
) -> Tuple[Dataset, LabelMap]:
    """
    Read a LIBSVM file; a ``.gz`` suffix selects gzip decompression.

    Returns the dataset and the raw-label mapping it was read with, so a test file can be
    loaded with the mapping of its training file.
    """
    path = os.fspath(path)
    if path.endswith(".gz"):
        handle = gzip.open(path, "rt", encoding="utf-8", newline="")
    else:
        handle = open(path, "r", encoding="utf-8", newline="")
    with handle as f:
        raw, features = _parse_rows(f, dim)
    if label_map is None:
        label_map = label_mapping(raw)
    dataset = Dataset(features, map_labels(raw, label_map))
    logger.info(f"🥦 Loaded {len(dataset)} samples of dimension {dataset.dim} from {path}")
    return dataset, label_map


def dumps_libsvm(samples: Dataset) -> str:
    buffer = io.StringIO()
    write_libsvm(samples, buffer)
    return buffer.getvalue()
