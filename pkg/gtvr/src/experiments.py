import logging
import os
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from gtvr.src.data.datasets import Dataset, has_unit_features, normalize_unit
from gtvr.src.data.libsvm import LabelMap, load_libsvm
from gtvr.src.data.splitters import Partition, partition
from gtvr.src.data.synthetic import synth_logistic, synth_quadratic
from gtvr.src.exceptions import ConfigError, PreconditionError
from gtvr.src.graph.topology import Topology, build_complete, build_topology
from gtvr.src.graph.weights import MixingMatrix, build_mixing
from gtvr.src.model.algorithms import AlgorithmKind, AlgorithmSpec, check_symmetric_weights
from gtvr.src.model.objectives import LogisticObjective, Objective, QuadraticObjective
from gtvr.src.tuning import TuningReport, tune

logger = logging.getLogger("GTVR")


@dataclass(frozen=True)
class GraphConfig:
    topology: str = "exponential"
    n: int = 10
    weights: str = "auto"
    radius: float = 0.5
    seed: int = 0
    edges: Optional[List[List[int]]] = None


@dataclass(frozen=True)
class DataConfig:
    objective: str = "quadratic"
    path: Optional[str] = None
    test_path: Optional[str] = None
    dim: Optional[int] = None
    samples_per_node: int = 50
    total_samples: Optional[int] = None
    p: int = 10
    separation: float = 1.0
    heterogeneity: float = 1.0
    spread: float = 1.0
    test_fraction: float = 0.0
    data_seed: int = 0
    lam: float = 0.05
    lam_mode: str = "fixed"
    partition: str = "even"
    proportions: Optional[List[float]] = None
    shuffle_seed: Optional[int] = None


@dataclass(frozen=True)
class AlgorithmConfig:
    kind: str = "gt_saga"
    alpha: Optional[float] = None
    alpha_scale: float = 1.0
    svrg_T: Optional[int] = None
    schedule: str = "constant"
    k0: float = 1000.0


@dataclass(frozen=True)
class RunSettings:
    iterations: int = 1000
    target_gap: Optional[float] = None
    cadence: Optional[int] = None
    seed: int = 0
    jobs: int = 1
    resume: Optional[str] = None
    save_state: bool = False


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "outputs"
    name: str = "run"


@dataclass(frozen=True)
class RunConfig:
    graph: GraphConfig = field(default_factory=GraphConfig)
    data: DataConfig = field(default_factory=DataConfig)
    algorithm: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    run: RunSettings = field(default_factory=RunSettings)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def from_dict(cls, payload: dict) -> "RunConfig":
        payload = payload or {}
        return cls(
            graph=GraphConfig(**payload.get("graph", {})),
            data=DataConfig(**payload.get("data", {})),
            algorithm=AlgorithmConfig(**payload.get("algorithm", {})),
            run=RunSettings(**payload.get("run", {})),
            output=OutputConfig(**payload.get("output", {})),
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def with_values(self, **sections) -> "RunConfig":
        """Copy with some fields replaced, e.g. ``with_values(graph={"n": 4})``."""
        updated = {}
        for section, values in sections.items():
            current = getattr(self, section)
            updated[section] = replace(current, **values)
        return replace(self, **updated)

    @property
    def trace_path(self) -> str:
        return os.path.join(self.output.dir, f"{self.output.name}.csv")

    @property
    def provenance_path(self) -> str:
        return os.path.join(self.output.dir, f"{self.output.name}.json")

    @property
    def state_path(self) -> str:
        return os.path.join(self.output.dir, f"{self.output.name}.state.json")


@dataclass
class Experiment:
    """Everything a run needs, built from a ``RunConfig`` before any iteration starts."""

    config: RunConfig
    topology: Topology
    mixing: MixingMatrix
    objective: Objective
    spec: AlgorithmSpec
    tuning: Optional[TuningReport]
    partition: Partition
    test_set: Optional[Dataset] = None

    @property
    def label(self) -> str:
        return f"{self.spec.kind.label} {self.topology.kind} n={self.topology.n}"

    def centralized(self) -> "Experiment":
        """The same data merged onto one node: SAGA / SVRG instead of their tracked versions."""
        objective = self.objective.merged()
        topology = build_complete(1)
        mixing = build_mixing(topology, "uniform")
        N = int(objective.counts[0])
        tuning = tune(self.spec.kind, objective.mu, objective.L, 0.0, N, N)
        spec = _algorithm_spec(self.config.algorithm, tuning, N)
        config = self.config.with_values(
            graph={"topology": "complete", "n": 1, "weights": "uniform"},
            algorithm={"alpha": spec.alpha, "svrg_T": spec.svrg_T},
        )
        return Experiment(
            config=config,
            topology=topology,
            mixing=mixing,
            objective=objective,
            spec=spec,
            tuning=tuning,
            partition=partition(N, 1),
            test_set=self.test_set,
        )


def _algorithm_spec(
    cfg: AlgorithmConfig, tuning: Optional[TuningReport], epoch_length: int
) -> AlgorithmSpec:
    kind = AlgorithmKind(cfg.kind)
    alpha = cfg.alpha
    if alpha is None:
        if tuning is None:
            raise ConfigError(f"{kind.label} needs an explicit step-size", field="algorithm.alpha")
        alpha = tuning.alpha * cfg.alpha_scale
    svrg_T = cfg.svrg_T
    if kind is AlgorithmKind.GT_SVRG and svrg_T is None:
        svrg_T = tuning.svrg_T
    elif kind is AlgorithmKind.DAVRG and svrg_T is None:
        # one pass over the largest local set per snapshot
        svrg_T = int(epoch_length)
    return AlgorithmSpec(kind=kind, alpha=alpha, svrg_T=svrg_T, schedule=cfg.schedule, k0=cfg.k0)


def _partition_for(cfg: DataConfig, N: int, n: int) -> Partition:
    mode = cfg.proportions if cfg.partition == "proportions" else cfg.partition
    if cfg.partition == "proportions" and cfg.proportions is None:
        raise ConfigError("partition mode 'proportions' needs a proportions list", field="data.proportions")
    return partition(N, n, mode, shuffle_seed=cfg.shuffle_seed)


def _read_dataset(
    path: str, dim: Optional[int], field_name: str, label_map: Optional[LabelMap] = None
) -> Tuple[Dataset, LabelMap]:
    if not os.path.exists(path):
        raise ConfigError(f"dataset file not found: {path}", field=field_name)
    samples, label_map = load_libsvm(path, dim=dim, label_map=label_map)
    if not has_unit_features(samples):
        samples = normalize_unit(samples)
    return samples, label_map


def _logistic_data(cfg: DataConfig, n: int):
    if cfg.path is not None:
        train, label_map = _read_dataset(cfg.path, cfg.dim, "data.path")
        test = None
        if cfg.test_path is not None:
            test, _ = _read_dataset(cfg.test_path, train.dim, "data.test_path", label_map)
        return train, test
    N = cfg.total_samples or n * cfg.samples_per_node
    n_test = int(round(N * cfg.test_fraction))
    samples = synth_logistic(N + n_test, cfg.p, cfg.data_seed, cfg.separation)
    if n_test == 0:
        return samples, None
    return samples.subset(np.arange(N)), samples.subset(np.arange(N, N + n_test))


def build_objective(cfg: DataConfig, n: int):
    """Objective, partition and optional test set described by the ``data`` section."""
    if cfg.objective == "quadratic":
        N = cfg.total_samples or n * cfg.samples_per_node
        parts = _partition_for(cfg, N, n)
        centers = synth_quadratic(n, parts.counts, cfg.p, cfg.data_seed, cfg.heterogeneity, cfg.spread)
        return QuadraticObjective(centers), parts, None
    if cfg.objective == "logistic":
        train, test = _logistic_data(cfg, n)
        parts = _partition_for(cfg, len(train), n)
        lam = cfg.lam
        if cfg.lam_mode == "inverse_nm":
            lam = 1.0 / len(train)
        elif cfg.lam_mode != "fixed":
            raise ConfigError(f"unknown lam_mode '{cfg.lam_mode}'", field="data.lam_mode")
        return LogisticObjective(parts.apply(train), lam), parts, test
    raise ConfigError(f"unknown objective '{cfg.objective}'", field="data.objective")


def build_experiment(config: RunConfig) -> Experiment:
    """
    Build topology, weights, objective and the algorithm settings.

    Every configuration problem surfaces here, before the first iteration.
    """
    g = config.graph
    topology = build_topology(g.topology, g.n, radius=g.radius, seed=g.seed, edges=g.edges)
    mixing = build_mixing(topology, g.weights)
    objective, parts, test_set = build_objective(config.data, g.n)
    tuning = tune(config.algorithm.kind, objective.mu, objective.L, mixing.sigma, parts.M, parts.m)
    spec = _algorithm_spec(config.algorithm, tuning, parts.M)
    try:
        check_symmetric_weights(spec.kind, mixing.W)
    except PreconditionError as e:
        raise ConfigError(f"{e}; {topology.kind} with {mixing.rule} weights is not", field="graph.topology")
    if tuning is not None:
        logger.info(
            f"🎯 {spec.kind.label}: alpha={spec.alpha:.4e}"
            + (f", T={spec.svrg_T}" if spec.svrg_T else "")
            + f", sigma={mixing.sigma:.4f}, Q={objective.Q:.3f}, big data={tuning.big_data}"
        )
    return Experiment(
        config=config,
        topology=topology,
        mixing=mixing,
        objective=objective,
        spec=spec,
        tuning=tuning,
        partition=parts,
        test_set=test_set,
    )
