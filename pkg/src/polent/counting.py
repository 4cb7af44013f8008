"""Coincidence counting: Born probabilities to Poisson counts and back.

Seeds: a simulation that needs many independent draws builds one
``numpy.random.SeedSequence(root_seed)`` and hands ``spawn(n)`` children to
its shards in a fixed order. Child ``k`` is always the k-th spawn, so
results never depend on which worker ran which shard.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgumentError
from .polarimetry import born_probability

RECORD_FIELDS = ("setting_label", "theta_s_deg", "theta_i_deg", "raw_counts",
                 "time_s", "singles_s", "singles_i")


@dataclass(frozen=True)
class RateBudget:
    """Pair rate at the fringe maximum plus the singles that set accidentals."""
    pair_rate: float
    singles_signal: float
    singles_idler: float
    window_tau: float

    def __post_init__(self):
        for name in ("pair_rate", "singles_signal", "singles_idler"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidArgumentError(f"{name} must be finite and >= 0, got {value!r}")
        if not math.isfinite(self.window_tau) or self.window_tau <= 0:
            raise InvalidArgumentError(f"window_tau must be > 0, got {self.window_tau!r}")

    @property
    def accidental_rate(self) -> float:
        return accidental_rate(self.singles_signal, self.singles_idler, self.window_tau)


# Operating points of the two reference setups. The LED maximum is ~100 per minute.
LED_BUDGET = RateBudget(pair_rate=100 / 60, singles_signal=220.0, singles_idler=220.0,
                        window_tau=1e-9)
LASER_BUDGET = RateBudget(pair_rate=11300.0, singles_signal=155000.0, singles_idler=155000.0,
                          window_tau=1e-9)


@dataclass(frozen=True)
class CountRecord:
    label: str
    theta_s: float | None  # radians, None for non-linear analyzers
    theta_i: float | None
    raw_counts: int
    acquisition_time: float
    singles_signal: float = 0.0
    singles_idler: float = 0.0

    def __post_init__(self):
        if self.raw_counts < 0 or int(self.raw_counts) != self.raw_counts:
            raise InvalidArgumentError(f"raw_counts must be a nonnegative integer, got {self.raw_counts!r}")
        if not self.acquisition_time > 0:
            raise InvalidArgumentError("acquisition_time must be > 0")

    @property
    def raw_rate(self) -> float:
        return self.raw_counts / self.acquisition_time

    def with_counts(self, counts: int) -> "CountRecord":
        return replace(self, raw_counts=int(counts))


def accidental_rate(singles_signal: float, singles_idler: float, tau: float) -> float:
    """Uncorrelated coincidence rate 2 * Ss * Si * tau."""
    if singles_signal < 0 or singles_idler < 0 or tau < 0:
        raise InvalidArgumentError("singles rates and window must be nonnegative")
    return 2.0 * singles_signal * singles_idler * tau


def predict_rate(rho, projector, budget: RateBudget) -> float:
    """Expected raw coincidence rate; probability 1/2 maps onto ``pair_rate``."""
    return 2.0 * budget.pair_rate * born_probability(rho, projector) + budget.accidental_rate


def sample_counts(rate: float, time: float, seed: int) -> int:
    if rate < 0 or not time > 0:
        raise InvalidArgumentError("need rate >= 0 and time > 0")
    return int(np.random.default_rng(seed).poisson(rate * time))


def draw_counts(rates, times, rng: np.random.Generator) -> np.ndarray:
    """Vectorized Poisson draw for many settings from one generator."""
    return rng.poisson(np.asarray(rates, dtype=float) * np.asarray(times, dtype=float))


def correct_counts(record: CountRecord, tau: float) -> float:
    """Accidental-subtracted coincidence rate, clamped at zero."""
    acc = accidental_rate(record.singles_signal, record.singles_idler, tau)
    return max(0.0, record.raw_rate - acc)


def simulate_record(rho, label, projector, budget, time, rng,
                    theta_s=None, theta_i=None) -> CountRecord:
    rate = predict_rate(rho, projector, budget)
    counts = int(rng.poisson(rate * time))
    return CountRecord(label, theta_s, theta_i, counts, time,
                       budget.singles_signal, budget.singles_idler)


def _deg(theta):
    return "" if theta is None else repr(math.degrees(theta))


def write_records_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_FIELDS)
        for r in records:
            writer.writerow([r.label, _deg(r.theta_s), _deg(r.theta_i), r.raw_counts,
                             repr(float(r.acquisition_time)), repr(float(r.singles_signal)),
                             repr(float(r.singles_idler))])


def read_records_csv(path) -> list[CountRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(RECORD_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise InvalidArgumentError(f"{path}: missing columns {sorted(missing)}")
        records = []
        for line, row in enumerate(reader, start=2):
            try:
                records.append(CountRecord(
                    row["setting_label"],
                    math.radians(float(row["theta_s_deg"])) if row["theta_s_deg"] else None,
                    math.radians(float(row["theta_i_deg"])) if row["theta_i_deg"] else None,
                    int(row["raw_counts"]),
                    float(row["time_s"]),
                    float(row["singles_s"]),
                    float(row["singles_i"]),
                ))
            except (TypeError, ValueError) as exc:
                raise InvalidArgumentError(f"{path}:{line}: {exc}") from None
    return records
