"""Failure-probability calculators for the copy-amplified T-gate teleportation.

Each copy succeeds only if all of its ``t`` teleportations give the +1
outcome, which happens with probability ``2^-t`` independently across copies.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional

import numpy as np

__all__ = [
    "ReliabilityReport",
    "delta_validity_region",
    "exact_failure_prob",
    "hoeffding_failure_bound",
    "min_copies",
    "min_copies_real",
    "monte_carlo_failure",
    "reliability_report",
    "sweep_csv",
    "sweep_rows",
    "theorem_delta",
]


def _check_bt(b: int, t: int, t_min: int = 0) -> None:
    if int(b) != b or b < 1:
        raise ValueError(f"b must be a positive integer, got {b!r}")
    if int(t) != t or t < t_min:
        raise ValueError(f"t must be an integer >= {t_min}, got {t!r}")


def exact_failure_prob(b: int, t: int) -> float:
    """Probability that every one of ``b`` copies has at least one failed teleportation."""
    _check_bt(b, t)
    return (1 - 2.0**-t) ** b


def theorem_delta(b: int, t: int) -> float:
    """Closed-form failure bound, unclamped (values above 1 are vacuous)."""
    _check_bt(b, t)
    if t == 0:
        return 0.0
    return math.exp(-b * 2.0 ** (-2 * t + 1) + math.sqrt(b) * 2.0 ** (-t + 2) - 2)


def hoeffding_failure_bound(b: int, t: int) -> float:
    """Hoeffding tail on at least ``b - 1`` failed copies out of ``b``."""
    _check_bt(b, t, t_min=1)
    gap = (b - 1) - b * (1 - 2.0**-t)
    return math.exp(-2 * gap**2 / b)


def min_copies_real(t: int, delta: float) -> float:
    """The real-valued copy threshold ``(sqrt(-ln(delta)/2) + 1)^2 4^t``."""
    if int(t) != t or t < 1:
        raise ValueError(f"t must be an integer >= 1, got {t!r}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    return (math.sqrt(-math.log(delta) / 2) + 1) ** 2 * 4**t


def min_copies(t: int, delta: float) -> int:
    """Smallest integer ``b`` meeting the copy threshold; checked against the exact success rate."""
    b = math.ceil(min_copies_real(t, delta))
    if 1 - exact_failure_prob(b, t) < 1 - delta:
        raise AssertionError(f"b={b} copies miss the target success 1-{delta} at t={t}")
    return b


def monte_carlo_failure(b: int, t: int, trials: int, seed: Optional[int] = None) -> float:
    """Fraction of ``trials`` in which all ``b`` copies fail; deterministic per seed."""
    _check_bt(b, t)
    if trials < 1:
        raise ValueError("trials must be positive")
    if t == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    fail = 1 - 2.0**-t
    # number of failed copies per trial is Binomial(b, fail)
    failed = rng.binomial(b, fail, size=trials)
    return float(np.mean(failed == b))


def delta_validity_region(t_values: Iterable[int], b_max: int) -> dict[int, list[int]]:
    """For each ``t``, the ``b <= b_max`` where the closed-form bound covers the exact failure rate."""
    return {
        t: [b for b in range(1, b_max + 1) if exact_failure_prob(b, t) <= theorem_delta(b, t)]
        for t in t_values
    }


@dataclass
class ReliabilityReport:
    t: int
    b: int
    exact_failure: float
    hoeffding_bound: Optional[float]
    theorem_delta: float
    delta_vacuous: bool
    min_copies_for_target: Optional[int]
    target: Optional[float]
    empirical_failure: Optional[float] = None
    trials: Optional[int] = None
    seed: Optional[int] = None

    @property
    def consistent(self) -> bool:
        """Empirical rate (if any) within 3 binomial standard errors of the exact rate."""
        if self.empirical_failure is None:
            return True
        p = self.exact_failure
        se = math.sqrt(p * (1 - p) / self.trials)
        return abs(self.empirical_failure - p) <= 3 * se + 1e-15

    def to_dict(self) -> dict:
        d = asdict(self)
        d["consistent"] = self.consistent
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        rows = [(k, "" if v is None else str(v)) for k, v in self.to_dict().items()]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


def reliability_report(b: int, t: int, target: Optional[float] = None,
                       trials: Optional[int] = None, seed: Optional[int] = None) -> ReliabilityReport:
    delta = theorem_delta(b, t)
    return ReliabilityReport(
        t=t,
        b=b,
        exact_failure=exact_failure_prob(b, t),
        hoeffding_bound=hoeffding_failure_bound(b, t) if t >= 1 else None,
        theorem_delta=delta,
        delta_vacuous=delta >= 1,
        min_copies_for_target=min_copies(t, target) if target is not None and t >= 1 else None,
        target=target,
        empirical_failure=monte_carlo_failure(b, t, trials, seed) if trials else None,
        trials=trials,
        seed=seed,
    )


def sweep_rows(t_values: Iterable[int], b_values: Iterable[int]) -> list[dict]:
    b_values = list(b_values)
    rows = []
    for t in t_values:
        for b in b_values:
            rows.append({
                "t": t,
                "b": b,
                "exact": exact_failure_prob(b, t),
                "hoeffding": hoeffding_failure_bound(b, t) if t >= 1 else 0.0,
                "theorem_delta": theorem_delta(b, t),
            })
    return rows


def sweep_csv(t_values: Iterable[int], b_values: Iterable[int]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["t", "b", "exact", "hoeffding", "theorem_delta"],
                            lineterminator="\n")
    writer.writeheader()
    for row in sweep_rows(t_values, b_values):
        writer.writerow({k: (f"{v:.12g}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
