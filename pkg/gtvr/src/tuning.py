"""Step-sizes, inner-loop lengths and contraction factors the convergence analysis guarantees."""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

from gtvr.src.exceptions import AssumptionError

logger = logging.getLogger("GTVR")

# Outer-loop contraction guaranteed for GT-SVRG with its tuned alpha and T.
SVRG_OUTER_RATE = 0.7

# Regime thresholds: m >= BIG_DATA_FACTOR * Q^2 / (1 - sigma)^2 and M / m <= BIG_DATA_BALANCE.
BIG_DATA_FACTOR = 10.0
BIG_DATA_BALANCE = 1.25


@dataclass(frozen=True)
class TuningReport:
    """
    Theoretical tuning of one method.

    Attributes:
        algorithm (str): ``gt_saga`` or ``gt_svrg``.
        alpha (float): Step-size.
        rate (float): Contraction per iteration (GT-SAGA) or per outer loop (GT-SVRG).
        svrg_T (Optional[int]): Inner-loop length, GT-SVRG only.
        big_data (bool): Whether the data sizes fall in the big-data regime.
        M (int): Largest local sample count.
        m (int): Smallest local sample count.
        note (str): Caveat attached to the predicted counts.
    """

    algorithm: str
    alpha: float
    rate: float
    svrg_T: Optional[int] = None
    big_data: bool = False
    M: int = 1
    m: int = 1
    note: str = "iteration counts are predicted up to an unreported constant (c = 1)"

    def iters_to_eps(self, eps: float) -> int:
        """Iterations until the bound ``rate^t`` reaches ``eps``, with leading constant 1."""
        if not 0 < eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {eps}")
        loops = math.ceil(math.log(eps) / math.log(self.rate))
        if self.svrg_T is None:
            return loops
        return loops * self.svrg_T

    def grad_evals_to_eps(self, eps: float) -> int:
        """Per-node component gradients until ``eps``, initialization included."""
        iters = self.iters_to_eps(eps)
        if self.svrg_T is None:
            return self.M + iters
        outer = iters // self.svrg_T
        return self.M + 2 * iters + outer * self.M

    def comm_rounds_to_eps(self, eps: float) -> int:
        """One round of neighbor exchange per iteration."""
        return self.iters_to_eps(eps)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_assumptions(mu: float, L: float, sigma: float):
    if not mu > 0:
        raise AssumptionError(f"Strong convexity requires mu > 0, got {mu}")
    if L < mu:
        raise AssumptionError(f"Smoothness L={L} is below mu={mu}")
    if not 0 <= sigma < 1:
        raise AssumptionError(f"Mixing requires 0 <= sigma < 1, got {sigma}")


def big_data_check(M: int, m: int, Q: float, sigma: float) -> bool:
    if sigma >= 1:
        return False
    return m >= BIG_DATA_FACTOR * Q**2 / (1.0 - sigma) ** 2 and M / m <= BIG_DATA_BALANCE


def saga_tuning(mu: float, L: float, sigma: float, M: int, m: int) -> TuningReport:
    """
    GT-SAGA step-size and per-iteration rate.

    ``alpha = min{1/(5 mu M), m (1 - sigma^2)^2 / (320 M L Q)}`` and
    ``rate = 1 - min{1/(20 M), m (1 - sigma^2)^2 / (1280 M Q^2)}``.
    """
    _check_assumptions(mu, L, sigma)
    if not M >= m >= 1:
        raise AssumptionError(f"Need M >= m >= 1, got M={M}, m={m}")
    Q = L / mu
    gap_sq = (1.0 - sigma**2) ** 2
    alpha = min(1.0 / (5.0 * mu * M), m * gap_sq / (320.0 * M * L * Q))
    rate = 1.0 - min(1.0 / (20.0 * M), m * gap_sq / (1280.0 * M * Q**2))
    return TuningReport(
        algorithm="gt_saga",
        alpha=alpha,
        rate=rate,
        big_data=big_data_check(M, m, Q, sigma),
        M=int(M),
        m=int(m),
    )


def svrg_tuning(mu: float, L: float, sigma: float, M: int = 1, m: int = 1) -> TuningReport:
    """GT-SVRG: ``alpha = (1 - sigma^2)^2 / (187 Q L)``, ``T = ceil(1496 Q^2 ln(200 Q) / (1 - sigma^2)^2)``."""
    _check_assumptions(mu, L, sigma)
    Q = L / mu
    gap_sq = (1.0 - sigma**2) ** 2
    alpha = gap_sq / (187.0 * Q * L)
    T = math.ceil(1496.0 * Q**2 / gap_sq * math.log(200.0 * Q))
    return TuningReport(
        algorithm="gt_svrg",
        alpha=alpha,
        rate=SVRG_OUTER_RATE,
        svrg_T=int(T),
        big_data=big_data_check(M, m, Q, sigma),
        M=int(M),
        m=int(m),
    )


def tune(kind: str, mu: float, L: float, sigma: float, M: int, m: int) -> Optional[TuningReport]:
    """Theoretical tuning for the variance-reduced kinds, ``None`` for the baselines."""
    kind = str(getattr(kind, "value", kind))
    if kind == "gt_saga":
        return saga_tuning(mu, L, sigma, M, m)
    if kind == "gt_svrg":
        return svrg_tuning(mu, L, sigma, M, m)
    return None


def complexity_report(mu: float, L: float, sigma: float, M: int, m: int, eps: float = 1e-10) -> dict:
    """
    Order-of-magnitude gradient-computation complexities next to the explicit-constant predictions.

    The order terms drop all constants: GT-SAGA needs
    ``max{M, (M/m) Q^2 / (1 - sigma)^2} log(1/eps)`` and GT-SVRG
    ``(M + Q^2 log Q / (1 - sigma^2)^2) log(1/eps)`` component gradients per node.
    """
    _check_assumptions(mu, L, sigma)
    Q = L / mu
    log_eps = math.log(1.0 / eps)
    saga = saga_tuning(mu, L, sigma, M, m)
    svrg = svrg_tuning(mu, L, sigma, M, m)
    return {
        "Q": Q,
        "sigma": sigma,
        "M": int(M),
        "m": int(m),
        "imbalance": M / m,
        "big_data": big_data_check(M, m, Q, sigma),
        "gt_saga_order": max(M, (M / m) * Q**2 / (1.0 - sigma) ** 2) * log_eps,
        "gt_svrg_order": (M + Q**2 * math.log(max(Q, math.e)) / (1.0 - sigma**2) ** 2) * log_eps,
        "gt_saga_predicted": saga.grad_evals_to_eps(eps),
        "gt_svrg_predicted": svrg.grad_evals_to_eps(eps),
        "gt_saga_comm_rounds": saga.comm_rounds_to_eps(eps),
        "gt_svrg_comm_rounds": svrg.comm_rounds_to_eps(eps),
    }
