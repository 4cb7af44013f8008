import math

import numpy as np
import pytest

from polent import counting, qstate
from polent.counting import CountRecord, RateBudget
from polent.errors import InvalidArgumentError
from polent.polarimetry import linear_pair_projector

SINGLET = qstate.bell_phase_state(math.pi)


def test_accidental_examples():
    assert counting.accidental_rate(155000, 155000, 1e-9) == pytest.approx(48.05, rel=1e-12)
    led = counting.accidental_rate(220, 220, 1e-9)
    assert led == pytest.approx(9.68e-5, rel=1e-12)
    assert led * 60 == pytest.approx(0.005808, rel=1e-12)
    assert counting.accidental_rate(0, 12345, 1e-9) == 0
    with pytest.raises(InvalidArgumentError):
        counting.accidental_rate(-1, 1, 1e-9)


def test_accidental_linear():
    base = counting.accidental_rate(100, 200, 1e-9)
    assert counting.accidental_rate(300, 200, 1e-9) == pytest.approx(3 * base)
    assert counting.accidental_rate(100, 600, 1e-9) == pytest.approx(3 * base)
    assert counting.accidental_rate(100, 200, 3e-9) == pytest.approx(3 * base)


def test_predict_rate_examples():
    budget = RateBudget(pair_rate=100 / 60, singles_signal=220, singles_idler=220, window_tau=1e-9)
    acc = budget.accidental_rate
    assert counting.predict_rate(SINGLET, linear_pair_projector(0, math.pi / 2), budget) == pytest.approx(100 / 60 + acc)
    assert counting.predict_rate(SINGLET, linear_pair_projector(0, 0), budget) == pytest.approx(acc, abs=1e-15)
    assert counting.predict_rate(SINGLET, linear_pair_projector(0, math.pi / 4), budget) == pytest.approx(50 / 60 + acc)


def test_predict_rate_outcome_sum(rng):
    budget = counting.LASER_BUDGET
    for _ in range(20):
        rho = qstate.random_density_matrix(rng)
        s, i = rng.uniform(0, math.pi, 2)
        total = sum(counting.predict_rate(rho, linear_pair_projector(a, b), budget)
                    for a in (s, s + math.pi / 2) for b in (i, i + math.pi / 2))
        assert total == pytest.approx(2 * budget.pair_rate + 4 * budget.accidental_rate, abs=1e-9)


def test_rate_budget_validation():
    with pytest.raises(InvalidArgumentError, match="window_tau"):
        RateBudget(1.0, 1.0, 1.0, 0.0)
    with pytest.raises(InvalidArgumentError, match="pair_rate"):
        RateBudget(-1.0, 1.0, 1.0, 1e-9)


def test_sample_counts_basic():
    assert counting.sample_counts(0.0, 10.0, 5) == 0
    assert counting.sample_counts(50.0, 10.0, 7) == counting.sample_counts(50.0, 10.0, 7)
    with pytest.raises(InvalidArgumentError):
        counting.sample_counts(1.0, 0.0, 1)


def test_sample_counts_poisson_moments():
    draws = np.array([counting.sample_counts(50.0, 10.0, seed) for seed in range(10_000)])
    assert abs(draws.mean() - 500) < 0.01 * 500
    assert abs(draws.var(ddof=1) - 500) < 0.10 * 500


def test_correct_counts():
    rec = CountRecord("x", 0.0, 0.0, 113000, 10.0, 155000, 155000)
    assert counting.correct_counts(rec, 1e-9) == pytest.approx(11251.95, abs=1e-9)
    low = CountRecord("x", 0.0, 0.0, 3, 1.0, 155000, 155000)
    assert counting.correct_counts(low, 1e-9) == 0.0
    bare = CountRecord("x", 0.0, 0.0, 42, 2.0)
    assert counting.correct_counts(bare, 1e-9) == 21.0


def test_count_record_validation():
    with pytest.raises(InvalidArgumentError):
        CountRecord("x", 0.0, 0.0, -1, 1.0)
    with pytest.raises(InvalidArgumentError):
        CountRecord("x", 0.0, 0.0, 1, 0.0)
    assert CountRecord("x", 0.0, 0.0, 5, 1.0).with_counts(9).raw_counts == 9


def test_records_csv_roundtrip(tmp_path):
    records = [CountRecord("H", 0.0, math.radians(22.5), 17, 300.0, 220.0, 221.0),
               CountRecord("DR", None, None, 4, 300.0, 220.0, 220.0)]
    path = tmp_path / "r.csv"
    counting.write_records_csv(path, records)
    assert path.read_text().splitlines()[0] == ",".join(counting.RECORD_FIELDS)
    back = counting.read_records_csv(path)
    assert back[1] == records[1]
    assert back[0].theta_i == pytest.approx(records[0].theta_i, abs=1e-15)
    assert back[0].raw_counts == 17


def test_records_csv_errors(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("setting_label,raw_counts\nH,1\n")
    with pytest.raises(InvalidArgumentError, match="missing columns"):
        counting.read_records_csv(path)
    path.write_text(",".join(counting.RECORD_FIELDS) + "\nH,0,0,abc,1,0,0\n")
    with pytest.raises(InvalidArgumentError, match=":2:"):
        counting.read_records_csv(path)
