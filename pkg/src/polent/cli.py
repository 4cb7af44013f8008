"""Command-line front end.

Exit codes: 0 ok, 2 configuration error, 3 estimator convergence failure,
4 reproduction mismatch. Output goes to ``--out`` or, failing that,
``$POLENT_OUTPUT_DIR`` (default ``./polent_output``).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import qstate, source
from .analysis import chsh as chsh_mod
from .analysis.bootstrap import BootstrapError
from .analysis.fringe import fit_fringe
from .analysis.tomography import combine_repeats, tomography_linear, tomography_mle
from .counting import accidental_rate, read_records_csv, write_records_csv
from .errors import ConfigurationError, ConvergenceError, InvalidArgumentError
from .experiment import FRINGE_BASES, chsh_from_records, fringe_scans, run_scenario
from .scenario import PRESETS, load_preset, load_scenario

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_MISMATCH = 0, 2, 3, 4
OUTPUT_ENV = "POLENT_OUTPUT_DIR"


def output_dir(arg) -> Path:
    path = Path(arg or os.environ.get(OUTPUT_ENV, "polent_output"))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve_scenario(spec):
    if spec in PRESETS and not Path(spec).exists():
        return load_preset(spec)
    return load_scenario(spec)


def dump_report(report) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def write_fit_curves(path, records, tau):
    """Fitted fringe curves sampled every degree, for plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["basis", "theta_i_deg", "fit_rate"])
        for basis, scan in fringe_scans(records, tau).items():
            fit = fit_fringe(scan)
            for deg in range(0, 181):
                writer.writerow([basis, deg, repr(float(fit(math.radians(deg))))])


def write_run(out: Path, prefix: str, report, data, rho_est, tau):
    (out / f"{prefix}report.json").write_text(dump_report(report))
    write_records_csv(out / f"{prefix}fringe.csv", data.fringe)
    write_fit_curves(out / f"{prefix}fringe_fit.csv", data.fringe, tau)
    write_records_csv(out / f"{prefix}chsh.csv", data.chsh)
    if data.tomography:
        write_records_csv(out / f"{prefix}tomography.csv", data.tomography)
    if rho_est is not None:
        (out / f"{prefix}rho.json").write_text(qstate.to_json(rho_est) + "\n")


def cmd_run_scenario(args):
    scenario = _resolve_scenario(args.config)
    out = output_dir(args.out)
    runs = run_scenario(scenario, timestamp=not args.no_timestamp)
    for k, (report, data, rho_est) in enumerate(runs, start=1):
        prefix = "" if len(runs) == 1 else f"path{k}_"
        write_run(out, prefix, report, data, rho_est, scenario.rates.window_tau)
        print(f"{scenario.name}{' path ' + str(k) if prefix else ''}: "
              f"S = {_fmt(report['S'], report['S_std'])}, "
              f"C = {_fmt(report['concurrence'], report['concurrence_std'])}, "
              f"phi/pi = {_fmt(report['phase_over_pi'], report['phase_over_pi_std'])}")
    print(f"wrote {out}")
    return EXIT_OK


def _fmt(value, err=None, digits=4):
    if value is None:
        return "n/a"
    if err is None:
        return f"{value:.{digits}f}"
    return f"{value:.{digits}f} +- {err:.{digits}f}"


@dataclass
class Row:
    quantity: str
    published: str
    computed: float
    passed: bool
    rule: str


def _within(label, published_value, computed, tol, published_text=None):
    return Row(label, published_text or f"{published_value:g}", computed,
               abs(computed - published_value) <= tol, f"|diff| <= {tol:g}")


def round_sig(x, sig):
    if x == 0:
        return 0.0
    return round(x, sig - 1 - int(math.floor(math.log10(abs(x)))))


def reproduce_modes(out):
    n = source.fiber_mode_count(source.FiberSpec(200.0, 0.39, 810.0))
    pump = source.fiber_mode_count(source.FiberSpec(50.0, 0.22, 405.0))
    return [
        Row("MMF-200-0.39 modes at 810 nm", "> 45,000", n, n > 45000, "> 45000"),
        Row("SPDC mode estimate fits in MMF", "~1,500 << capacity", source.SPDC_MODE_ESTIMATE,
            source.SPDC_MODE_ESTIMATE < n, "1500 < capacity"),
        Row("MMF-50-0.22 modes at 405 nm (pump)", "not quoted", pump, True, "info"),
    ]


def reproduce_accidentals(out):
    laser = accidental_rate(155000.0, 155000.0, 1e-9)
    led_per_min = accidental_rate(220.0, 220.0, 1e-9) * 60
    return [
        Row("laser accidentals (1/s)", "~50", round_sig(laser, 2),
            round_sig(laser, 1) == 50, "1 s.f. agrees"),
        Row("LED accidentals (1/min)", "~0.006", round_sig(led_per_min, 2),
            round_sig(led_per_min, 1) == 0.006, "1 s.f. agrees"),
    ]


PUBLISHED_VISIBILITY = {
    "led": {"H": 0.9807, "V": 0.9585, "A": 0.8145, "D": 0.8131},
    "laser": {"H": 0.9769, "V": 0.9462, "A": 0.9508, "D": 0.9340},
}
PUBLISHED_S = {"led": 2.532, "laser": 2.695}
PUBLISHED_STATE = {
    "led": {"concurrence": 0.834, "phase_over_pi": -0.941, "fidelity": 0.8988},
    "laser": {"concurrence": 0.952, "phase_over_pi": -0.943, "fidelity": 0.9636},
}
VISIBILITY_TOL = 0.05
S_TOL = 0.1
STATE_TOL = {"concurrence": 0.03, "phase_over_pi": 0.05, "fidelity": 0.03}


def _preset_runs(out, name):
    scenario = load_preset(name)
    runs = run_scenario(scenario, timestamp=False)
    for k, (report, data, rho_est) in enumerate(runs, start=1):
        prefix = f"{name}_" if len(runs) == 1 else f"{name}_path{k}_"
        write_run(out, prefix, report, data, rho_est, scenario.rates.window_tau)
    return runs


def reproduce_fig2(out):
    rows = []
    for name in ("led", "laser"):
        report = _preset_runs(out, name)[0][0]
        for basis in FRINGE_BASES:
            rows.append(_within(f"{name} visibility {basis}", PUBLISHED_VISIBILITY[name][basis],
                                report["visibilities"][basis], VISIBILITY_TOL))
        rows.append(_within(f"{name} S", PUBLISHED_S[name], report["S"], S_TOL))
    return rows


def reproduce_fig3(out):
    rows = []
    for name in ("led", "laser"):
        report = _preset_runs(out, name)[0][0]
        for key, tol in STATE_TOL.items():
            rows.append(_within(f"{name} {key}", PUBLISHED_STATE[name][key], report[key], tol))
    return rows


def reproduce_fig4(out):
    model = qstate.mix([(0.5, qstate.x_state(0.933, 0.5558 * math.pi)),
                        (0.5, qstate.x_state(0.916, 0.3220 * math.pi))])
    rows = [_within("model mixture concurrence", 0.8558, qstate.concurrence(model), 0.02)]
    runs = _preset_runs(out, "fig4_paths")
    published_paths = [(0.933, 0.5558), (0.916, 0.3220)]
    for k, ((report, _, _), (c, phi)) in enumerate(zip(runs, published_paths), start=1):
        rows.append(_within(f"path {k} concurrence", c, report["concurrence"], 0.01))
        rows.append(_within(f"path {k} phi/pi", phi, report["phase_over_pi"], 0.005))
    estimates = [rho for _, _, rho in runs]
    mixed = qstate.mix([(0.5, estimates[0]), (0.5, estimates[1])])
    rows.append(_within("reconstructed mixture concurrence", 0.8558, qstate.concurrence(mixed), 0.02))
    return rows


REPRODUCERS = {
    "fig2": reproduce_fig2,
    "fig3": reproduce_fig3,
    "fig4": reproduce_fig4,
    "modes": reproduce_modes,
    "accidentals": reproduce_accidentals,
}


def print_rows(rows, stream=None):
    stream = stream or sys.stdout
    width = max(len(r.quantity) for r in rows)
    print(f"{'quantity':<{width}}  {'published':>20}  {'computed':>12}  result  rule", file=stream)
    for r in rows:
        print(f"{r.quantity:<{width}}  {r.published:>20}  {r.computed:>12.6g}  "
              f"{'pass' if r.passed else 'FAIL':<6}  {r.rule}", file=stream)


def cmd_reproduce(args):
    out = output_dir(args.out)
    rows = REPRODUCERS[args.target](out)
    print_rows(rows)
    with open(out / f"reproduce_{args.target}.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["quantity", "published", "computed", "passed", "rule"])
        for r in rows:
            writer.writerow([r.quantity, r.published, repr(float(r.computed)), r.passed, r.rule])
    failed = [r.quantity for r in rows if not r.passed]
    if failed:
        print("mismatch: " + ", ".join(failed), file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_mode_count(args):
    try:
        fiber = source.FiberSpec(args.diameter_um, args.na, args.wavelength_nm)
    except InvalidArgumentError as exc:
        raise ConfigurationError(str(exc)) from None
    print(f"V = {source.v_number(fiber):.2f}")
    print(f"modes = {source.fiber_mode_count(fiber):.0f}")
    return EXIT_OK


def _read(path):
    try:
        return read_records_csv(path)
    except (OSError, InvalidArgumentError) as exc:
        raise ConfigurationError(str(exc)) from None


def cmd_tomography(args):
    records = combine_repeats(_read(args.counts))
    try:
        linear = tomography_linear(records, args.tau)
    except InvalidArgumentError as exc:
        raise ConfigurationError(str(exc)) from None
    rho = tomography_mle(records, args.tau)
    report = qstate.validate_physical(linear)
    print(f"linear inversion physical: {report.passed} (min eigenvalue {report.min_eigenvalue:.3g})")
    print(f"concurrence = {qstate.concurrence(rho):.4f}")
    try:
        print(f"phi/pi = {qstate.infer_phase(rho) / math.pi:.4f}")
    except qstate.DegeneratePhaseError:
        print("phi/pi = undefined")
    print(f"fidelity to phi = {args.target_phi_deg:g} deg: "
          f"{qstate.fidelity_to_pure(rho, math.radians(args.target_phi_deg)):.4f}")
    if args.out or os.environ.get(OUTPUT_ENV):
        out = output_dir(args.out)
        (out / "rho.json").write_text(qstate.to_json(rho) + "\n")
    print(qstate.to_json(rho))
    return EXIT_OK


def infer_chsh_settings(records, sign):
    """Recover a, a', b, b' from the analyzer angles present in a CHSH file."""
    def base(angles):
        angles = sorted({round(math.degrees(t) % 180, 6) for t in angles})
        bases = sorted({a % 90 for a in angles})
        if len(bases) != 2:
            raise ConfigurationError(f"expected two analyzer bases per arm, found angles {angles}")
        return bases

    if any(r.theta_s is None or r.theta_i is None for r in records):
        raise ConfigurationError("CHSH records need theta_s_deg and theta_i_deg")
    a, ap = base([r.theta_s for r in records])
    b, bp = base([r.theta_i for r in records])
    return chsh_mod.ChshSettings.from_degrees(a, ap, b, bp, sign_assignment=sign)


def cmd_chsh(args):
    records = _read(args.counts)
    sign = "max" if args.sign == "max" else int(args.sign)
    if args.optimize:
        rho = tomography_mle(combine_repeats(records), args.tau)
        settings, s = chsh_mod.chsh_optimize(rho)
        print("optimal settings (deg): a=%.2f a'=%.2f b=%.2f b'=%.2f" % settings.degrees())
        print(f"predicted S = {s:.4f}")
        return EXIT_OK
    settings = infer_chsh_settings(records, sign)
    try:
        s = chsh_from_records(records, settings, args.tau)
    except KeyError as exc:
        raise ConfigurationError(str(exc)) from None
    print("settings (deg): a=%g a'=%g b=%g b'=%g" % settings.degrees())
    print(f"S = {s:.4f}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="polent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-scenario", help="simulate and analyze one scenario")
    p.add_argument("config", help=f"scenario file or preset name ({', '.join(PRESETS)})")
    p.add_argument("--out")
    p.add_argument("--no-timestamp", action="store_true",
                   help="omit provenance.generated_at for byte-stable reports")
    p.set_defaults(func=cmd_run_scenario)

    p = sub.add_parser("reproduce", help="compare computed values with published ones")
    p.add_argument("target", choices=sorted(REPRODUCERS))
    p.add_argument("--out")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("mode-count", help="step-index fiber mode estimate")
    p.add_argument("--diameter-um", type=float, required=True)
    p.add_argument("--na", type=float, required=True)
    p.add_argument("--wavelength-nm", type=float, required=True)
    p.set_defaults(func=cmd_mode_count)

    p = sub.add_parser("tomography", help="reconstruct a state from 16 count records")
    p.add_argument("counts")
    p.add_argument("--tau", type=float, default=0.0, help="coincidence window (s) for accidentals")
    p.add_argument("--target-phi-deg", type=float, default=180.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_tomography)

    p = sub.add_parser("chsh", help="CHSH S from count records")
    p.add_argument("counts")
    p.add_argument("--optimize", action="store_true",
                   help="treat the file as tomography records and report optimal angles")
    p.add_argument("--sign", default="1", choices=["0", "1", "2", "3", "max"],
                   help="index of the subtracted correlator (default 1: E(a, b'))")
    p.add_argument("--tau", type=float, default=0.0)
    p.set_defaults(func=cmd_chsh)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, BootstrapError) as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
