"""End-to-end simulated experiment: source -> counts -> analysis -> report."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import qstate
from .analysis import chsh as chsh_mod
from .analysis.bootstrap import bootstrap
from .analysis.fringe import FringeScan, fit_fringe
from .analysis.tomography import combine_repeats, tomography_mle
from .counting import CountRecord, correct_counts, predict_rate
from .scenario import chsh_settings_for
from .polarimetry import (LINEAR_DEGREES, linear_pair_projector, normalize_angle,
                          tomography_settings)
from .source import sagnac_output

FRINGE_BASES = ("H", "V", "A", "D")


@dataclass
class ExperimentData:
    rho_true: np.ndarray
    fringe: list[CountRecord]
    tomography: list[CountRecord]
    chsh: list[CountRecord]
    chsh_settings: chsh_mod.ChshSettings | None


def _angle_key(theta):
    return round(math.degrees(normalize_angle(theta)), 6)


def idler_angles(step_deg: float):
    return [math.radians(a) for a in np.arange(0.0, 180.0 - 1e-9, step_deg)]


def _simulate(rho, specs, scenario, rng):
    """``specs`` is a list of (label, theta_s, theta_i, projector)."""
    budget, acq = scenario.rates, scenario.acquisition
    rates = np.array([predict_rate(rho, proj, budget) for *_, proj in specs])
    records = []
    for _ in range(acq.n_repeats):
        counts = rng.poisson(rates * acq.time_per_setting_s)
        for (label, ts, ti, _), c in zip(specs, counts):
            records.append(CountRecord(label, ts, ti, int(c), acq.time_per_setting_s,
                                       budget.singles_signal, budget.singles_idler))
    return records


def fringe_specs(step_deg):
    specs = []
    for basis in FRINGE_BASES:
        ts = math.radians(LINEAR_DEGREES[basis])
        for ti in idler_angles(step_deg):
            specs.append((basis, ts, ti, linear_pair_projector(ts, ti)))
    return specs


def chsh_specs(settings):
    specs, seen = [], set()
    for a, b in settings.pairs:
        for s, i in chsh_mod.outcome_angles(a, b):
            key = (_angle_key(s), _angle_key(i))
            if key not in seen:
                seen.add(key)
                specs.append(("chsh", s, i, linear_pair_projector(s, i)))
    return specs


def simulate_experiment(scenario, profile, seed_seq: np.random.SeedSequence) -> ExperimentData:
    """Draw every record of one run. Child seeds: fringe, tomography, chsh."""
    rho = sagnac_output(profile, scenario.distortion, scenario.leakage)
    s_fringe, s_tomo, s_chsh = (np.random.default_rng(s) for s in seed_seq.spawn(3))
    fringe = _simulate(rho, fringe_specs(scenario.analysis.fringe_step_deg), scenario, s_fringe)
    tomo = []
    if scenario.analysis.tomography:
        specs = [(s.label, None, None, s.projector) for s in tomography_settings()]
        tomo = _simulate(rho, specs, scenario, s_tomo)
    settings = chsh_settings_for(scenario.analysis)
    if settings is None:
        # angles chosen from the state an experimenter would have reconstructed
        est = tomography_mle(combine_repeats(tomo), scenario.rates.window_tau)
        settings, _ = chsh_mod.chsh_optimize(est)
    chsh_records = _simulate(rho, chsh_specs(settings), scenario, s_chsh)
    return ExperimentData(rho, fringe, tomo, chsh_records, settings)


def rate_table(records, tau):
    """Corrected rate per (theta_s, theta_i) with repeats pooled."""
    counts, times, acc = {}, {}, {}
    for r in records:
        key = (_angle_key(r.theta_s), _angle_key(r.theta_i))
        counts[key] = counts.get(key, 0) + r.raw_counts
        times[key] = times.get(key, 0.0) + r.acquisition_time
        acc[key] = r
    return {k: correct_counts(CountRecord(acc[k].label, acc[k].theta_s, acc[k].theta_i, counts[k],
                                          times[k], acc[k].singles_signal, acc[k].singles_idler), tau)
            for k in counts}


def fringe_scans(records, tau):
    scans = {}
    for basis in FRINGE_BASES:
        recs = [r for r in records if r.label == basis]
        if not recs:
            continue
        table = rate_table(recs, tau)
        keys = sorted(table)
        scans[basis] = FringeScan(basis, math.radians(keys[0][0]),
                                  tuple(math.radians(k[1]) for k in keys),
                                  tuple(table[k] for k in keys))
    return scans


def chsh_from_records(records, settings, tau):
    table = rate_table(records, tau)

    def rate(s, i):
        key = (_angle_key(s), _angle_key(i))
        if key not in table:
            raise KeyError(f"no CHSH record at theta_s={key[0]} deg, theta_i={key[1]} deg")
        return table[key]

    return chsh_mod.chsh_S_from_rates(settings, rate)


def analyze(data_records, settings, tau, target_phi, tomography=True):
    """Every derived scalar from one set of records (also the bootstrap kernel)."""
    fringe, tomo, chsh_records = data_records
    out = {}
    for basis, scan in fringe_scans(fringe, tau).items():
        out[f"visibility_{basis}"] = fit_fringe(scan).visibility
    if chsh_records:
        out["S"] = chsh_from_records(chsh_records, settings, tau)
    if tomography and tomo:
        rho = tomography_mle(combine_repeats(tomo), tau)
        out["concurrence"] = qstate.concurrence(rho)
        out["fidelity"] = qstate.fidelity_to_pure(rho, target_phi)
        try:
            out["phase"] = qstate.infer_phase(rho)
        except qstate.DegeneratePhaseError:
            out["phase"] = math.nan
    return out


def run(scenario, profile, seed_seq, *, timestamp=True):
    """Simulate and analyze one pump configuration; returns (report, data, rho_est)."""
    data_seed, boot_seed = seed_seq.spawn(2)
    data = simulate_experiment(scenario, profile, data_seed)
    tau = scenario.rates.window_tau
    cfg = scenario.analysis
    groups = (data.fringe, data.tomography, data.chsh)
    point = analyze(groups, data.chsh_settings, tau, cfg.target_phi, cfg.tomography)
    rho_est = tomography_mle(combine_repeats(data.tomography), tau) if cfg.tomography else None

    std, n_failed = {}, 0
    if cfg.bootstrap >= 2:
        sizes = [len(g) for g in groups]
        flat = [r for g in groups for r in g]

        def kernel(records):
            split = np.split(np.arange(len(records)), np.cumsum(sizes)[:-1])
            parts = tuple([records[k] for k in idx] for idx in split)
            return analyze(parts, data.chsh_settings, tau, cfg.target_phi, cfg.tomography)

        result = bootstrap(flat, kernel, cfg.bootstrap, int(boot_seed.generate_state(1)[0]),
                           circular=("phase",), workers=cfg.workers)
        std, n_failed = result.std, result.n_failed

    report = build_report(scenario, profile, data, point, std, n_failed, seed_seq, timestamp)
    return report, data, rho_est


def _num(x):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return None
    return float(x)


def build_report(scenario, profile, data, point, std, n_failed, seed_seq, timestamp):
    settings = data.chsh_settings
    a, ap, b, bp = settings.angles
    true_rho = data.rho_true
    try:
        true_phase = qstate.infer_phase(true_rho) / math.pi
    except qstate.DegeneratePhaseError:
        true_phase = None
    phase = point.get("phase")
    report = {
        "visibilities": {k: _num(point.get(f"visibility_{k}")) for k in FRINGE_BASES},
        "visibilities_std": {k: _num(std.get(f"visibility_{k}")) for k in FRINGE_BASES},
        "S": _num(point.get("S")),
        "S_std": _num(std.get("S")),
        "concurrence": _num(point.get("concurrence")),
        "concurrence_std": _num(std.get("concurrence")),
        "phase_over_pi": _num(phase / math.pi) if phase is not None else None,
        "phase_over_pi_std": _num(std["phase"] / math.pi) if "phase" in std else None,
        "fidelity": _num(point.get("fidelity")),
        "fidelity_std": _num(std.get("fidelity")),
        "settings": {
            "chsh": {
                "theta_s_deg": math.degrees(a), "theta_s_prime_deg": math.degrees(ap),
                "theta_i_deg": math.degrees(b), "theta_i_prime_deg": math.degrees(bp),
                "theta_s_rad": a, "theta_s_prime_rad": ap,
                "theta_i_rad": b, "theta_i_prime_rad": bp,
                "sign_assignment": settings.sign_assignment,
                "mode": scenario.analysis.chsh if isinstance(scenario.analysis.chsh, str) else "explicit",
            },
            "target_phi_deg": math.degrees(scenario.analysis.target_phi),
            "target_phi_rad": scenario.analysis.target_phi,
            "pump_positions_mm": list(profile.positions),
            "time_per_setting_s": scenario.acquisition.time_per_setting_s,
            "n_repeats": scenario.acquisition.n_repeats,
        },
        "model": {
            "concurrence": qstate.concurrence(true_rho),
            "phase_over_pi": true_phase,
            "fidelity": qstate.fidelity_to_pure(true_rho, scenario.analysis.target_phi),
            "S": chsh_mod.chsh_predict(true_rho, settings),
        },
        "provenance": {
            "scenario": scenario.name,
            "seed": scenario.analysis.seed,
            "seed_path": list(seed_seq.spawn_key),
            "n_resamples": scenario.analysis.bootstrap,
            "n_failed_resamples": n_failed,
            "config_hash": scenario.config_hash(),
        },
    }
    if timestamp:
        report["provenance"]["generated_at"] = datetime.now(timezone.utc).isoformat()
    return report


def run_scenario(scenario, *, timestamp=True):
    """One report per pump configuration (several for multi-path laser runs)."""
    root = np.random.SeedSequence(scenario.analysis.seed)
    profiles = scenario.profiles()
    children = root.spawn(len(profiles))
    return [run(scenario, p, s, timestamp=timestamp) for p, s in zip(profiles, children)]
