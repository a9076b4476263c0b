import copy
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from gtvr.src.data.datasets import Dataset
from gtvr.src.exceptions import DimensionError, DivergenceError, MetricError, OracleError
from gtvr.src.experiments import Experiment, RunConfig, build_experiment
from gtvr.src.model.algorithms import init_states, stack, step
from gtvr.src.model.estimators import CounterStream, NodeState, states_from_dict, states_to_dict
from gtvr.src.model.objectives import Objective, QuadraticObjective
from gtvr.src.utils import git_describe

logger = logging.getLogger("GTVR")

TRACE_COLUMNS = [
    "iter",
    "epoch",
    "gap",
    "consensus_err",
    "tracking_err",
    "msd",
    "test_acc",
    "grad_evals",
]

# Iterations recorded one by one before the default cadence thins out.
DENSE_PREFIX = 1000
SPARSE_CADENCE = 10

REFERENCE_TOL = 1e-12
REFERENCE_BUDGET = 1_000_000


@dataclass(frozen=True)
class MetricRecord:
    iter: int
    epoch: float
    gap: float
    consensus_err: float
    tracking_err: float
    msd: float
    test_acc: float
    grad_evals: int


@dataclass
class MetricsTrace:
    """
    Metric records of one run plus the provenance needed to reproduce it.

    Attributes:
        records (List[MetricRecord]): Records in iteration order.
        provenance (dict): Config, tuning, mixing matrix, reference solution and build info.
        diverged_at (Optional[int]): First non-finite iteration, if the run diverged.
        comm_rounds (int): Neighbor-exchange rounds performed.
    """

    records: List[MetricRecord] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    diverged_at: Optional[int] = None
    comm_rounds: int = 0

    def __len__(self) -> int:
        return len(self.records)

    @property
    def last(self) -> MetricRecord:
        return self.records[-1]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.records], columns=TRACE_COLUMNS)

    def to_csv(self, path: str):
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        self.to_frame().to_csv(path, index=False, na_rep="", float_format="%.17g")

    def write_provenance(self, path: str):
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        payload = {
            **self.provenance,
            "diverged_at": self.diverged_at,
            "comm_rounds": self.comm_rounds,
        }
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True, default=_jsonable)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, provenance: Optional[dict] = None) -> "MetricsTrace":
        missing = [c for c in TRACE_COLUMNS if c not in frame.columns]
        if missing:
            raise MetricError(f"Trace is missing columns {missing}")
        records = [
            MetricRecord(
                iter=int(row["iter"]),
                epoch=float(row["epoch"]),
                gap=float(row["gap"]),
                consensus_err=float(row["consensus_err"]),
                tracking_err=float(row["tracking_err"]),
                msd=float(row["msd"]),
                test_acc=float(row["test_acc"]),
                grad_evals=int(row["grad_evals"]),
            )
            for _, row in frame.iterrows()
        ]
        return cls(records=records, provenance=provenance or {})

    @classmethod
    def from_csv(cls, path: str) -> "MetricsTrace":
        provenance = {}
        sibling = os.path.splitext(path)[0] + ".json"
        if os.path.exists(sibling):
            with open(sibling) as f:
                provenance = json.load(f)
        return cls.from_frame(pd.read_csv(path), provenance)

    def first_reaching(self, threshold: float, column: str = "gap") -> Optional[MetricRecord]:
        for record in self.records:
            if getattr(record, column) <= threshold:
                return record
        return None


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return str(value)


@dataclass(frozen=True)
class ReferenceSolution:
    x_star: np.ndarray
    grad_norm: float
    zeta_sq: float
    f_star: float
    iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "x_star": self.x_star.tolist(),
            "grad_norm": self.grad_norm,
            "zeta_sq": self.zeta_sq,
            "f_star": self.f_star,
            "iterations": self.iterations,
        }


def _zeta_sq(objective: Objective, x_star: np.ndarray) -> float:
    return float(
        np.mean([np.sum(objective.batch_grad(i, x_star) ** 2) for i in range(objective.n_nodes)])
    )


def solve_reference(
    objective: Objective, tol: float = REFERENCE_TOL, max_iter: int = REFERENCE_BUDGET
) -> ReferenceSolution:
    """
    Minimizer of the global cost, computed before any stochastic run.

    Quadratic costs use their closed form. Otherwise full-batch gradient descent with step
    ``1/L`` runs from the origin until ``||grad F|| <= tol * max(1, ||grad F(0)||)``.

    Raises:
        OracleError: if the tolerance is not met within ``max_iter`` steps.
    """
    if isinstance(objective, QuadraticObjective):
        x_star = objective.minimizer()
        return ReferenceSolution(
            x_star=x_star,
            grad_norm=float(np.linalg.norm(objective.full_grad(x_star))),
            zeta_sq=_zeta_sq(objective, x_star),
            f_star=objective.value(x_star),
        )
    x = np.zeros(objective.dim)
    g = objective.full_grad(x)
    threshold = tol * max(1.0, float(np.linalg.norm(g)))
    step_size = 1.0 / objective.L
    iterations = 0
    while np.linalg.norm(g) > threshold:
        if iterations >= max_iter:
            raise OracleError(
                f"Reference solver stopped at ||grad F||={np.linalg.norm(g):.3e} after "
                f"{max_iter} iterations (target {threshold:.3e})"
            )
        x = x - step_size * g
        g = objective.full_grad(x)
        iterations += 1
    logger.debug(f"🧭 Reference solution after {iterations} gradient steps")
    return ReferenceSolution(
        x_star=x,
        grad_norm=float(np.linalg.norm(g)),
        zeta_sq=_zeta_sq(objective, x),
        f_star=objective.value(x),
        iterations=iterations,
    )


def accuracy(x: np.ndarray, test: Dataset) -> float:
    """Share of samples with ``sign(x^T theta) == label``; a zero score counts as wrong."""
    if len(test) == 0:
        raise MetricError("Accuracy is undefined on an empty test set")
    if test.dim != np.asarray(x).shape[-1]:
        raise DimensionError(f"Model has dimension {np.asarray(x).shape[-1]}, data {test.dim}")
    scores = test.labels * (test.features @ x)
    return float(np.mean(scores > 0))


def default_cadence(k: int) -> bool:
    return k <= DENSE_PREFIX or k % SPARSE_CADENCE == 0


class Engine:
    """
    Runs one experiment round by round and records its metrics.

    Args:
        experiment (Experiment): Built experiment.
        jobs (int): Worker threads for node updates within a round.
        verbose (bool): Show a progress bar and per-record debug lines.
        reference (Optional[ReferenceSolution]): Precomputed minimizer, solved on demand otherwise.
    """

    def __init__(
        self,
        experiment: Experiment,
        jobs: int = 1,
        verbose: bool = False,
        reference: Optional[ReferenceSolution] = None,
    ):
        self.experiment = experiment
        self.jobs = max(1, int(jobs))
        self.verbose = verbose
        self.reference = reference or solve_reference(experiment.objective)

    @property
    def settings(self):
        return self.experiment.config.run

    def _should_record(self, k: int) -> bool:
        if self.settings.cadence is None:
            return default_cadence(k)
        return k % self.settings.cadence == 0

    def measure(self, k: int, X: np.ndarray, Y: np.ndarray, evals: np.ndarray) -> MetricRecord:
        objective = self.experiment.objective
        ref = self.reference
        x_bar = X.mean(axis=0)
        consensus = float(np.sum((X - x_bar) ** 2))
        if self.experiment.spec.kind.tracks_gradient:
            tracking = float(np.sum((Y - Y.mean(axis=0)) ** 2))
        else:
            tracking = float("nan")
        test = self.experiment.test_set
        return MetricRecord(
            iter=int(k),
            epoch=float(np.max(evals / objective.counts)),
            gap=float(np.mean(objective.gaps(X, ref.x_star, ref.f_star))),
            consensus_err=consensus,
            tracking_err=tracking,
            msd=float(np.mean(np.sum((X - ref.x_star) ** 2, axis=1))),
            test_acc=accuracy(x_bar, test) if test is not None else float("nan"),
            grad_evals=int(np.max(evals)),
        )

    def provenance(self) -> dict:
        exp = self.experiment
        return {
            "label": exp.label,
            "config": exp.config.to_dict(),
            "algorithm": {
                "kind": exp.spec.kind.value,
                "alpha": exp.spec.alpha,
                "svrg_T": exp.spec.svrg_T,
                "schedule": exp.spec.schedule,
            },
            "tuning": exp.tuning.to_dict() if exp.tuning is not None else None,
            "mixing": exp.mixing.to_dict(),
            "sigma": exp.mixing.sigma,
            "objective": exp.objective.describe(),
            "counts": exp.partition.counts,
            "reference": {k: v for k, v in self.reference.to_dict().items() if k != "x_star"},
            "seeds": {
                "run": exp.config.run.seed,
                "graph": (
                    exp.topology.seed if exp.topology.seed is not None else exp.config.graph.seed
                ),
                "data": exp.config.data.data_seed,
            },
            "git": git_describe(),
        }

    def run(
        self, initial_states: Optional[List[NodeState]] = None, start: int = 0
    ) -> MetricsTrace:
        """
        Iterate until the budget or the target gap is reached.

        Args:
            initial_states (Optional[List[NodeState]]): Resume from these states instead of
                initializing at the origin.
            start (int): Iteration index of ``initial_states``.

        Raises:
            DivergenceError: as soon as an iterate is not finite; the error carries the trace
                with a final record of the last finite iteration.
        """
        exp = self.experiment
        W = exp.mixing.W
        stream = CounterStream(self.settings.seed)
        if initial_states is None:
            states = init_states(exp.objective, exp.spec.kind)
        else:
            states = copy.deepcopy(initial_states)
        trace = MetricsTrace(provenance=self.provenance())
        ref = self.reference
        logger.info(f"🧮 zeta^2 = {ref.zeta_sq:.6e}, F(x*) = {ref.f_star:.12f}")

        evals = np.array([s.grad_evals for s in states], dtype=float)
        X, Y = stack(states, "x"), stack(states, "y")
        trace.records.append(self.measure(start, X, Y, evals))

        end = start + self.settings.iterations
        pool = ThreadPoolExecutor(max_workers=self.jobs) if self.jobs > 1 else None
        progress = tqdm(range(start, end), disable=not self.verbose, desc=exp.label)
        try:
            for k in progress:
                last_good = (k, X, Y, evals)
                states, spent = step(exp.spec, W, states, exp.objective, k, stream, pool)
                evals = evals + spent
                trace.comm_rounds += 1
                X, Y = stack(states, "x"), stack(states, "y")
                if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
                    self._diverged(trace, last_good, k + 1)
                if self._should_record(k + 1) or k + 1 == end:
                    record = self.measure(k + 1, X, Y, evals)
                    trace.records.append(record)
                    if self.verbose:
                        logger.debug(
                            f"k={record.iter} gap={record.gap:.3e} "
                            f"cons={record.consensus_err:.3e}"
                        )
                    target = self.settings.target_gap
                    if target is not None and record.gap <= target:
                        break
        finally:
            progress.close()
            if pool is not None:
                pool.shutdown()
        self.final_states = states
        return trace

    def _diverged(self, trace: MetricsTrace, last_good, bad_iter: int):
        k, X, Y, evals = last_good
        if trace.last.iter != k:
            trace.records.append(self.measure(k, X, Y, evals))
        trace.diverged_at = bad_iter
        logger.error(f"💥 Non-finite iterate at k={bad_iter}; last finite iteration {k}")
        raise DivergenceError(
            f"{self.experiment.label} diverged at iteration {bad_iter} "
            f"(alpha={self.experiment.spec.alpha:.4e})",
            trace=trace,
            last_finite_iteration=k,
        )


def save_states(states: List[NodeState], path: str, iteration: int):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        json.dump({"iteration": iteration, "states": states_to_dict(states)}, f)


def load_states(path: str):
    with open(path) as f:
        payload = json.load(f)
    return states_from_dict(payload["states"]), int(payload["iteration"])


def run(config: RunConfig, verbose: bool = False, write: bool = True) -> MetricsTrace:
    """
    Build, run and (optionally) persist one experiment.

    The trace CSV and provenance JSON land in ``config.output.dir``; a diverged run still writes
    its partial trace before the error propagates.
    """
    experiment = build_experiment(config)
    engine = Engine(experiment, jobs=config.run.jobs, verbose=verbose)
    initial, start = None, 0
    if config.run.resume is not None:
        initial, start = load_states(config.run.resume)
        logger.info(f"⏯️ Resuming from {config.run.resume} at iteration {start}")
    try:
        trace = engine.run(initial_states=initial, start=start)
    except DivergenceError as e:
        if write and e.trace is not None:
            e.trace.to_csv(config.trace_path)
            e.trace.write_provenance(config.provenance_path)
        raise
    if write:
        trace.to_csv(config.trace_path)
        trace.write_provenance(config.provenance_path)
        if config.run.save_state:
            save_states(engine.final_states, config.state_path, trace.last.iter)
    return trace


def evals_to_threshold(trace: MetricsTrace, threshold: float) -> Optional[int]:
    record = trace.first_reaching(threshold)
    return None if record is None else record.grad_evals


def epochs_to_threshold(trace: MetricsTrace, threshold: float) -> Optional[float]:
    record = trace.first_reaching(threshold)
    return None if record is None else record.epoch


def _centralized_key(experiment: Experiment) -> bytes:
    objective = experiment.objective
    if isinstance(objective, QuadraticObjective):
        return b"q" + np.concatenate(objective.centers).tobytes()
    merged = np.concatenate([d.features for d in objective.node_sets])
    labels = np.concatenate([d.labels for d in objective.node_sets])
    return b"l" + merged.tobytes() + labels.tobytes() + np.float64(objective.lam).tobytes()


def speedup_study(
    config: RunConfig,
    node_counts: Sequence[int],
    threshold: float = 1e-13,
    verbose: bool = False,
) -> pd.DataFrame:
    """
    Per-node gradient savings of the decentralized method over its centralized counterpart.

    The total sample count stays fixed while ``n`` varies. For every ``n`` the centralized
    method runs on the merged data; the ratio is centralized gradient evaluations over the
    per-node evaluations of the decentralized run, both taken where the gap first reaches
    ``threshold``. Runs that never reach it are reported as unreached with no ratio.

    Rows outside the big-data regime, and every row of an untuned baseline, carry
    ``big_data=False`` and ``linear_speedup=False``: their ratio is reported but no linear
    speedup is claimed for them.
    """
    if config.data.total_samples is None and config.data.path is None:
        total = config.graph.n * config.data.samples_per_node
        config = config.with_values(data={"total_samples": total})
    config = config.with_values(run={"target_gap": threshold})

    central_cache: Dict[bytes, MetricsTrace] = {}
    rows = []
    for n in node_counts:
        cfg = config.with_values(graph={"n": int(n)})
        experiment = build_experiment(cfg)
        big_data = bool(experiment.tuning.big_data) if experiment.tuning else False
        if not big_data:
            logger.warning(
                f"⚠️ n={n}: outside the big-data regime, no linear speedup is claimed"
            )
        key = _centralized_key(experiment)
        if key not in central_cache:
            central = experiment.centralized()
            central_cache[key] = Engine(central, verbose=verbose).run()
        central_trace = central_cache[key]
        trace = Engine(experiment, jobs=cfg.run.jobs, verbose=verbose).run()

        central_evals = evals_to_threshold(central_trace, threshold)
        decentral_evals = evals_to_threshold(trace, threshold)
        reached = central_evals is not None and decentral_evals is not None
        rows.append(
            {
                "n": int(n),
                "sigma": experiment.mixing.sigma,
                "m": experiment.partition.m,
                "big_data": big_data,
                "central_evals": central_evals,
                "node_evals": decentral_evals,
                "ratio": central_evals / decentral_evals if reached else np.nan,
                "reached": reached,
                "linear_speedup": big_data and reached,
            }
        )
        status = f"ratio {rows[-1]['ratio']:.3f}" if reached else "unreached"
        logger.info(f"🚀 n={n}: {status}")
    return pd.DataFrame(rows)


def composite_error(trace: MetricsTrace) -> np.ndarray:
    tracking = np.nan_to_num(trace.column("tracking_err"), nan=0.0)
    return trace.column("gap") + trace.column("consensus_err") + tracking


def outer_loop_ratios(trace: MetricsTrace, T: int) -> np.ndarray:
    """
    Ratios of the composite error ``gap + consensus + tracking`` across consecutive outer loops.

    Only multiples of ``T`` that were recorded are used.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    iters = trace.column("iter").astype(int)
    errors = composite_error(trace)
    at_boundary = {int(k): e for k, e in zip(iters, errors) if k % T == 0}
    boundaries = sorted(at_boundary)
    return np.array(
        [
            at_boundary[b] / at_boundary[a]
            for a, b in zip(boundaries[:-1], boundaries[1:])
            if b - a == T
        ]
    )


def summary_row(value, trace: MetricsTrace, threshold: float) -> dict:
    return {
        "value": value,
        "sigma": trace.provenance.get("sigma", np.nan),
        "final_gap": trace.last.gap,
        "epochs_to_threshold": epochs_to_threshold(trace, threshold),
        "diverged": trace.diverged_at is not None,
    }
