"""Polarization projectors, waveplates and the tomography setting table.

Angles are radians measured from horizontal. Jones vectors are (H, V).

Circular convention used throughout::

    R = (|H> - i|V>)/sqrt(2)
    L = (|H> + i|V>)/sqrt(2)

An analyzer is a QWP followed by a HWP followed by a PBS whose transmitted
port passes H. It projects onto the state that the two plates carry to |H>.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .qstate import _require_physical


def normalize_angle(theta: float) -> float:
    """Reduce a linear-polarizer angle onto [0, pi)."""
    if not np.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    out = math.fmod(theta, math.pi)
    if out < 0:
        out += math.pi
    if out >= math.pi:
        out = 0.0
    return out


def perpendicular(theta: float) -> float:
    return normalize_angle(theta + math.pi / 2)


def linear_vector(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)], dtype=complex)


def linear_projector(theta: float) -> np.ndarray:
    v = linear_vector(theta)
    return np.outer(v, v.conj())


def _rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]], dtype=complex)


def waveplate_operator(kind: str, axis_angle: float) -> np.ndarray:
    """Jones matrix of an ideal zero-order waveplate, fast axis at ``axis_angle``.

    Retardance is applied to the slow axis: diag(1, exp(i*delta)) in the
    plate frame, with delta = pi (half) or pi/2 (quarter).
    """
    retardance = {"half": math.pi, "quarter": math.pi / 2}
    if kind not in retardance:
        raise ValueError(f"kind must be 'half' or 'quarter', got {kind!r}")
    rot = _rotation(axis_angle)
    plate = np.diag([1.0, np.exp(1j * retardance[kind])])
    return rot.conj().T @ plate @ rot


def analyzer_vector(qwp: float, hwp: float) -> np.ndarray:
    """State transmitted with certainty by QWP(qwp) -> HWP(hwp) -> PBS(H)."""
    plates = waveplate_operator("half", hwp) @ waveplate_operator("quarter", qwp)
    return plates.conj().T @ np.array([1.0, 0.0], dtype=complex)


def projector_from_waveplates(qwp: float, hwp: float) -> np.ndarray:
    v = analyzer_vector(qwp, hwp)
    return np.outer(v, v.conj())


_S = 1 / math.sqrt(2)
LABEL_VECTORS = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_S, _S], dtype=complex),
    "A": np.array([-_S, _S], dtype=complex),
    "R": np.array([_S, -1j * _S], dtype=complex),
    "L": np.array([_S, 1j * _S], dtype=complex),
}

# (qwp, hwp) in degrees for each analyzer label
WAVEPLATE_DEGREES = {
    "H": (0.0, 0.0),
    "V": (0.0, 45.0),
    "D": (45.0, 22.5),
    "A": (45.0, -22.5),
    "R": (0.0, 22.5),
    "L": (0.0, -22.5),
}

# Linear analyzers as polarizer angles (degrees); R and L have none.
LINEAR_DEGREES = {"H": 0.0, "V": 90.0, "D": 45.0, "A": 135.0}

# Signal label then idler label. Informationally complete; the order is a
# repo constant and is not claimed to match any particular experiment.
TOMOGRAPHY_LABELS = (
    "HH", "HV", "VV", "VH",
    "RH", "RV", "DV", "DH",
    "DR", "DD", "RD", "HD",
    "VD", "VL", "HL", "RL",
)


def label_projector(label: str) -> np.ndarray:
    v = LABEL_VECTORS[label]
    return np.outer(v, v.conj())


@dataclass(frozen=True)
class TomographySetting:
    label: str
    qwp_s: float
    hwp_s: float
    qwp_i: float
    hwp_i: float
    projector: np.ndarray

    @property
    def signal(self) -> str:
        return self.label[0]

    @property
    def idler(self) -> str:
        return self.label[1]


def two_qubit_projector(signal: np.ndarray, idler: np.ndarray) -> np.ndarray:
    return np.kron(signal, idler)


def linear_pair_projector(theta_s: float, theta_i: float) -> np.ndarray:
    return np.kron(linear_projector(theta_s), linear_projector(theta_i))


def tomography_settings() -> list[TomographySetting]:
    settings = []
    for label in TOMOGRAPHY_LABELS:
        qs, hs = (math.radians(a) for a in WAVEPLATE_DEGREES[label[0]])
        qi, hi = (math.radians(a) for a in WAVEPLATE_DEGREES[label[1]])
        proj = two_qubit_projector(label_projector(label[0]), label_projector(label[1]))
        settings.append(TomographySetting(label, qs, hs, qi, hi, proj))
    return settings


def measurement_matrix(settings=None) -> np.ndarray:
    """Rows are conj(vec(P_k)) so that ``A @ vec(rho) = tr(rho P_k)``."""
    if settings is None:
        settings = tomography_settings()
    return np.array([s.projector.T.reshape(-1) for s in settings])


def gram_matrix(settings=None) -> np.ndarray:
    """G[j, k] = tr(P_j P_k)."""
    if settings is None:
        settings = tomography_settings()
    projs = [s.projector for s in settings]
    return np.array([[np.trace(a @ b).real for b in projs] for a in projs])


def settings_table_csv() -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label_s", "label_i", "qwp_s_deg", "hwp_s_deg", "qwp_i_deg", "hwp_i_deg"])
    for label in TOMOGRAPHY_LABELS:
        s, i = label
        writer.writerow([s, i, *WAVEPLATE_DEGREES[s], *WAVEPLATE_DEGREES[i]])
    return buf.getvalue()


def born_probability(rho, projector) -> float:
    rho = _require_physical(rho)
    return float(np.clip(np.trace(rho @ projector).real, 0.0, 1.0))
