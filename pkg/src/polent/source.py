"""Sagnac source model: a pump-weighted mixture of Bell-phase states.

The transverse coordinate is one-dimensional and measured in millimeters.
Each transverse pump sample produces an X-state whose phase and
concurrence are read off a distortion map; the fibers collect all samples
so the detected state is their convex mixture.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import qstate
from .errors import InvalidArgumentError


@dataclass(frozen=True)
class PumpSpatialProfile:
    positions: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.positions) == 0 or len(self.positions) != len(self.weights):
            raise InvalidArgumentError("profile needs matching, nonempty positions and weights")
        w = np.asarray(self.weights, dtype=float)
        if not np.all(np.isfinite(self.positions)):
            raise InvalidArgumentError("profile positions must be finite")
        if np.any(~np.isfinite(w)) or np.any(w < 0) or abs(w.sum() - 1) > 1e-9:
            raise InvalidArgumentError("profile weights must be nonnegative and sum to 1")


def led_profile(diameter: float, n_samples: int) -> PumpSpatialProfile:
    """Flat-top profile sampled uniformly across the beam diameter."""
    if diameter <= 0 or n_samples < 1:
        raise InvalidArgumentError("led_profile needs diameter > 0 and n_samples >= 1")
    if n_samples == 1:
        positions = np.zeros(1)
    else:
        positions = np.linspace(-diameter / 2, diameter / 2, n_samples)
    weights = np.full(n_samples, 1.0 / n_samples)
    return PumpSpatialProfile(tuple(positions.tolist()), tuple(weights.tolist()))


def laser_profile(diameter: float, center: float = 0.0) -> PumpSpatialProfile:
    """Narrow beam treated as one sample at ``center``.

    Over a ~0.1 mm spot the distortion phase is effectively constant, so the
    diameter is validated but does not spread the sample.
    """
    if diameter <= 0:
        raise InvalidArgumentError("laser_profile needs diameter > 0")
    if not np.isfinite(center):
        raise InvalidArgumentError("center must be finite")
    return PumpSpatialProfile((float(center),), (1.0,))


@dataclass(frozen=True)
class DistortionMap:
    """Piecewise-linear table position -> (phase, component concurrence).

    Phases are interpolated exactly as stored and wrapped afterwards, so a
    table should hold a continuous (unwrapped) phase column. Positions outside
    the table are undefined.
    """
    positions: tuple[float, ...]
    phis: tuple[float, ...]
    concurrences: tuple[float, ...]

    def __post_init__(self):
        n = len(self.positions)
        if n == 0 or len(self.phis) != n or len(self.concurrences) != n:
            raise InvalidArgumentError("distortion map columns must be nonempty and equal length")
        x = np.asarray(self.positions, dtype=float)
        if np.any(np.diff(x) <= 0):
            raise InvalidArgumentError("distortion map positions must be strictly increasing")
        c = np.asarray(self.concurrences, dtype=float)
        if np.any(c < 0) or np.any(c > 1):
            raise InvalidArgumentError("component concurrence must lie in [0, 1]")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(self.phis))):
            raise InvalidArgumentError("distortion map entries must be finite")

    def at(self, position: float) -> tuple[float, float]:
        x = np.asarray(self.positions)
        tol = 1e-12 * max(1.0, float(np.abs(x).max()))
        if position < x[0] - tol or position > x[-1] + tol:
            raise InvalidArgumentError(
                f"distortion map undefined at {position} mm (covers {x[0]}..{x[-1]} mm)")
        phi = float(np.interp(position, x, self.phis))
        conc = float(np.interp(position, x, self.concurrences))
        return qstate.wrap_phase(phi), conc


def linear_ramp(center_phi: float, slope: float, concurrence: float = 1.0,
                half_width: float = 5.0) -> DistortionMap:
    """Phase ramp ``center_phi + slope * x`` (slope in rad/mm)."""
    return DistortionMap(
        (-half_width, half_width),
        (center_phi - slope * half_width, center_phi + slope * half_width),
        (concurrence, concurrence),
    )


def constant_map(phi: float, concurrence: float = 1.0, half_width: float = 5.0) -> DistortionMap:
    return linear_ramp(phi, 0.0, concurrence, half_width)


def read_distortion_csv(path) -> DistortionMap:
    """Read ``position_mm,phi_rad[,concurrence]``; concurrence defaults to 1."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "position_mm" not in fields or "phi_rad" not in fields:
            raise InvalidArgumentError(f"{path}: header must contain position_mm,phi_rad")
        rows = sorted(reader, key=lambda r: float(r["position_mm"]))
    if not rows:
        raise InvalidArgumentError(f"{path}: no rows")
    return DistortionMap(
        tuple(float(r["position_mm"]) for r in rows),
        tuple(float(r["phi_rad"]) for r in rows),
        tuple(float(r["concurrence"]) if r.get("concurrence") not in (None, "") else 1.0
              for r in rows),
    )


def write_distortion_csv(path, dmap: DistortionMap) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["position_mm", "phi_rad", "concurrence"])
        for row in zip(dmap.positions, dmap.phis, dmap.concurrences):
            writer.writerow([repr(float(v)) for v in row])


def _leakage_state():
    rho = np.zeros((4, 4), dtype=complex)
    rho[qstate.HH, qstate.HH] = rho[qstate.VV, qstate.VV] = 0.5
    return rho


def sagnac_output(pump: PumpSpatialProfile, distortion: DistortionMap,
                  leakage: float = 0.0) -> np.ndarray:
    """Detected two-photon state for a pump profile through a distorted loop.

    ``leakage`` moves that fraction of the population incoherently onto
    HH/VV, a lumped model of imperfect polarization optics. With the
    default of zero the output is exactly the pump-weighted mixture of
    X-states.
    """
    if not 0.0 <= leakage <= 1.0:
        raise InvalidArgumentError("leakage must lie in [0, 1]")
    components = []
    for x, w in zip(pump.positions, pump.weights):
        phi, conc = distortion.at(x)
        components.append((w, qstate.x_state(conc, phi)))
    rho = qstate.mix(components)
    if leakage:
        rho = (1 - leakage) * rho + leakage * _leakage_state()
    return rho


@dataclass(frozen=True)
class FiberSpec:
    core_diameter: float  # micrometers
    numerical_aperture: float
    wavelength: float  # nanometers

    def __post_init__(self):
        if not (self.core_diameter > 0 and self.wavelength > 0
                and 0 < self.numerical_aperture < 1):
            raise InvalidArgumentError(
                "fiber needs positive core diameter and wavelength and 0 < NA < 1")


def v_number(fiber: FiberSpec) -> float:
    return math.pi * (fiber.core_diameter * 1e3) * fiber.numerical_aperture / fiber.wavelength


def fiber_mode_count(fiber: FiberSpec) -> float:
    """Step-index estimate V**2 / 2 of the guided spatial modes."""
    return v_number(fiber) ** 2 / 2


# Recorded as quoted; no derivation is attempted.
SPDC_MODE_ESTIMATE = 1500
DIVERGENCE_HALF_ANGLE_MRAD = {"led": 11.0, "laser": 2.6}
