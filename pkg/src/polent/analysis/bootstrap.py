"""Parametric bootstrap over Poisson-resampled count records."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConvergenceError, InvalidArgumentError

# Analysis failures that count against a resample instead of aborting the run.
RECOVERABLE = (ValueError, ZeroDivisionError, ConvergenceError, np.linalg.LinAlgError)


class BootstrapError(RuntimeError):
    pass


@dataclass
class BootstrapResult:
    mean: dict[str, float]
    std: dict[str, float]
    n_resamples: int
    n_failed: int
    failures: dict[str, int] = field(default_factory=dict)


def resample(records, rng: np.random.Generator):
    """Each record's count redrawn as Poisson(observed count)."""
    counts = rng.poisson([r.raw_counts for r in records])
    return [r.with_counts(c) for r, c in zip(records, counts)]


def _one(records, analyze, seed_seq):
    rng = np.random.default_rng(seed_seq)
    try:
        return analyze(resample(records, rng)), None
    except RECOVERABLE as exc:
        return None, type(exc).__name__


def bootstrap(records, analyze, n_resamples: int, seed: int, *,
              circular=(), workers: int | None = None) -> BootstrapResult:
    """Mean and sample standard deviation of every scalar ``analyze`` returns.

    ``analyze`` maps a list of records to ``{name: value}``. Names listed in
    ``circular`` are angles in radians and are averaged on the circle.
    Resample k always uses the k-th child of ``SeedSequence(seed)``, and the
    reduction runs in index order, so ``workers`` never changes the result.
    """
    if n_resamples < 2:
        raise InvalidArgumentError("bootstrap needs n_resamples >= 2")
    records = list(records)
    children = np.random.SeedSequence(seed).spawn(n_resamples)
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            outcomes = list(pool.map(lambda s: _one(records, analyze, s), children))
    else:
        outcomes = [_one(records, analyze, s) for s in children]

    values: dict[str, list[float]] = {}
    failures: dict[str, int] = {}
    n_failed = 0
    for result, err in outcomes:
        if err is not None:
            n_failed += 1
            failures[err] = failures.get(err, 0) + 1
            continue
        for name, v in result.items():
            values.setdefault(name, []).append(float(v))
    if n_failed * 2 > n_resamples:
        raise BootstrapError(f"{n_failed} of {n_resamples} resamples failed: {failures}")

    mean, std = {}, {}
    for name, vals in values.items():
        v = np.asarray(vals)
        v = v[np.isfinite(v)]
        if v.size < 2:
            mean[name], std[name] = (float(v[0]) if v.size else math.nan), math.nan
        elif name in circular:
            centre = float(np.angle(np.exp(1j * v).mean()))
            dev = np.angle(np.exp(1j * (v - centre)))
            mean[name] = centre + float(dev.mean())
            std[name] = float(dev.std(ddof=1))
        else:
            mean[name] = float(v.mean())
            std[name] = float(v.std(ddof=1))
    return BootstrapResult(mean, std, n_resamples, n_failed, failures)
