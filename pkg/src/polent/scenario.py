"""Scenario files: YAML describing one simulated experiment.

See ``scenarios/led.scenario`` for a fully annotated example. Validation
errors name the offending field with its dotted path, e.g.
``rates.window_tau``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from . import source
from .analysis.chsh import CANONICAL_SETTINGS, PUBLISHED_SETTINGS, ChshSettings
from .counting import RateBudget
from .errors import ConfigurationError, InvalidArgumentError

PRESETS = ("led", "laser", "fig4_paths")

# Default distortion: linear phase ramp centred on the measured phase.
DEFAULT_RAMP = {"center_phi_over_pi": -0.943, "slope_over_pi_per_mm": 0.55, "concurrence": 0.98}


@dataclass(frozen=True)
class PumpConfig:
    kind: str
    diameter_mm: float
    n_samples: int = 1
    centers_mm: tuple[float, ...] = (0.0,)


@dataclass(frozen=True)
class AcquisitionConfig:
    time_per_setting_s: float
    n_repeats: int = 1


@dataclass(frozen=True)
class AnalysisConfig:
    chsh: object = "canonical"  # "canonical" | "published" | "optimize" | ChshSettings
    tomography: bool = True
    bootstrap: int = 100
    seed: int = 0
    target_phi: float = math.pi
    fringe_step_deg: float = 15.0
    workers: int = 1


@dataclass(frozen=True)
class Scenario:
    name: str
    pump: PumpConfig
    distortion: source.DistortionMap
    distortion_label: str
    leakage: float
    rates: RateBudget
    acquisition: AcquisitionConfig
    analysis: AnalysisConfig
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def profiles(self):
        if self.pump.kind == "led":
            return [source.led_profile(self.pump.diameter_mm, self.pump.n_samples)]
        return [source.laser_profile(self.pump.diameter_mm, c) for c in self.pump.centers_mm]

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class _Reader:
    """Typed access into the parsed mapping with dotted-path diagnostics."""

    def __init__(self, data, lines):
        self.data = data
        self.lines = lines

    def fail(self, path, msg):
        line = self.lines.get(path)
        where = f" (line {line})" if line else ""
        raise ConfigurationError(f"{path}{where}: {msg}")

    def get(self, path, default=KeyError):
        node = self.data
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                if default is KeyError:
                    self.fail(path, "missing required field")
                return default
            node = node[part]
        return node

    def number(self, path, default=KeyError, *, positive=False, nonneg=False, integer=False):
        value = self.get(path, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        if integer and int(value) != value:
            self.fail(path, f"expected an integer, got {value!r}")
        if not math.isfinite(value):
            self.fail(path, "must be finite")
        if positive and value <= 0:
            self.fail(path, f"must be > 0, got {value!r}")
        if nonneg and value < 0:
            self.fail(path, f"must be >= 0, got {value!r}")
        return int(value) if integer else float(value)


def _collect_lines(node, prefix="", out=None):
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            path = f"{prefix}.{key.value}" if prefix else str(key.value)
            out[path] = key.start_mark.line + 1
            _collect_lines(value, path, out)
    return out


def parse_scenario(text: str, base_dir: Path | None = None, name: str = "scenario") -> Scenario:
    try:
        tree = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse scenario: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigurationError("scenario must be a mapping at top level")
    r = _Reader(data, _collect_lines(tree))

    kind = r.get("pump.kind")
    if kind not in ("led", "laser"):
        r.fail("pump.kind", f"must be 'led' or 'laser', got {kind!r}")
    centers = r.get("pump.center_mm", 0.0)
    centers = centers if isinstance(centers, list) else [centers]
    for k, c in enumerate(centers):
        if isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c):
            r.fail("pump.center_mm", f"entry {k} is not a finite number")
    if kind == "led" and centers != [0.0] and centers != [0]:
        r.fail("pump.center_mm", "LED profiles are centred at 0; use a laser pump for offsets")
    pump = PumpConfig(
        kind=kind,
        diameter_mm=r.number("pump.diameter_mm", positive=True),
        n_samples=r.number("pump.n_samples", 1, positive=True, integer=True),
        centers_mm=tuple(float(c) for c in centers),
    )

    dist = r.get("distortion", {"preset": "default_ramp"})
    if not isinstance(dist, dict):
        r.fail("distortion", "must be a mapping with 'preset' or 'file'")
    if "file" in dist:
        path = Path(dist["file"])
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        if not path.exists():
            r.fail("distortion.file", f"file not found: {path}")
        try:
            dmap = source.read_distortion_csv(path)
        except (InvalidArgumentError, ValueError, KeyError) as exc:
            r.fail("distortion.file", str(exc))
        label = f"file:{path.name}"
    else:
        preset = dist.get("preset", "default_ramp")
        if preset == "default_ramp":
            params = {**DEFAULT_RAMP}
            for key in params:
                if key in dist:
                    params[key] = r.number(f"distortion.{key}")
            try:
                dmap = source.linear_ramp(params["center_phi_over_pi"] * math.pi,
                                          params["slope_over_pi_per_mm"] * math.pi,
                                          params["concurrence"])
            except InvalidArgumentError as exc:
                r.fail("distortion", str(exc))
            label = "default_ramp"
        elif preset == "fig4":
            dmap = fig4_distortion()
            label = "fig4"
        else:
            r.fail("distortion.preset", f"unknown preset {preset!r}")

    leakage = r.number("source.leakage", 0.0, nonneg=True)
    if leakage > 1:
        r.fail("source.leakage", "must be <= 1")

    rates = {}
    for key in ("pair_rate", "singles_signal", "singles_idler"):
        rates[key] = r.number(f"rates.{key}", nonneg=True)
    rates["window_tau"] = r.number("rates.window_tau", positive=True)
    budget = RateBudget(**rates)

    acquisition = AcquisitionConfig(
        time_per_setting_s=r.number("acquisition.time_per_setting_s", positive=True),
        n_repeats=r.number("acquisition.n_repeats", 1, positive=True, integer=True),
    )

    chsh_cfg = r.get("analysis.chsh", "canonical")
    if isinstance(chsh_cfg, dict):
        try:
            sign = chsh_cfg.get("sign_assignment", 1)
            chsh_cfg = ChshSettings.from_degrees(
                r.number("analysis.chsh.theta_s_deg"), r.number("analysis.chsh.theta_s_prime_deg"),
                r.number("analysis.chsh.theta_i_deg"), r.number("analysis.chsh.theta_i_prime_deg"),
                sign_assignment=sign)
        except InvalidArgumentError as exc:
            r.fail("analysis.chsh", str(exc))
    elif chsh_cfg not in ("canonical", "published", "optimize"):
        r.fail("analysis.chsh", f"expected canonical, published, optimize or angles, got {chsh_cfg!r}")
    tomography = r.get("analysis.tomography", True)
    if not isinstance(tomography, bool):
        r.fail("analysis.tomography", "must be true or false")
    if chsh_cfg == "optimize" and not tomography:
        r.fail("analysis.chsh", "'optimize' picks angles from the tomography estimate; enable tomography")
    n_boot = r.number("analysis.bootstrap", 100, nonneg=True, integer=True)
    if n_boot == 1:
        r.fail("analysis.bootstrap", "use 0 to disable or >= 2 resamples")
    step = r.number("analysis.fringe_step_deg", 15.0, positive=True)
    if 180.0 / step < 6:
        r.fail("analysis.fringe_step_deg", "must give at least 6 idler angles per fringe")
    analysis = AnalysisConfig(
        chsh=chsh_cfg,
        tomography=tomography,
        bootstrap=n_boot,
        seed=r.number("analysis.seed", 0, nonneg=True, integer=True),
        target_phi=math.radians(r.number("analysis.target_phi_deg", 180.0)),
        fringe_step_deg=step,
        workers=r.number("analysis.workers", 1, positive=True, integer=True),
    )
    return Scenario(
        name=str(data.get("name", name)), pump=pump, distortion=dmap, distortion_label=label,
        leakage=leakage, rates=budget, acquisition=acquisition, analysis=analysis, raw=data)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from None
    return parse_scenario(text, base_dir=path.parent, name=path.stem)


def preset_path(name: str):
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {PRESETS}")
    return resources.files("polent") / "scenarios" / f"{name}.scenario"


def load_preset(name: str) -> Scenario:
    ref = preset_path(name)
    return parse_scenario(ref.read_text(), name=name)


def fig4_distortion() -> source.DistortionMap:
    """Two-point table through the states measured on the two pump paths."""
    ref = resources.files("polent") / "scenarios" / "fig4_distortion.csv"
    with resources.as_file(ref) as path:
        return source.read_distortion_csv(path)


def chsh_settings_for(cfg: AnalysisConfig):
    if cfg.chsh == "canonical":
        return CANONICAL_SETTINGS
    if cfg.chsh == "published":
        return PUBLISHED_SETTINGS
    if isinstance(cfg.chsh, ChshSettings):
        return cfg.chsh
    return None


def scenario_dict(s: Scenario) -> dict:
    return {"name": s.name, "pump": asdict(s.pump), "distortion": s.distortion_label,
            "leakage": s.leakage, "rates": asdict(s.rates), "acquisition": asdict(s.acquisition)}
