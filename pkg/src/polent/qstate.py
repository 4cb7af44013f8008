"""Two-photon polarization states and entanglement measures.

States are plain 4x4 complex numpy arrays in the fixed basis order
(HH, HV, VH, VV), first letter the signal photon.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePhaseError, InvalidArgumentError, InvalidStateError

BASIS = ("HH", "HV", "VH", "VV")
HH, HV, VH, VV = range(4)

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
EIGENVALUE_TOL = -1e-9
# looser bound used to reject input to the entanglement measures
NONPHYSICAL_TOL = -1e-6
PHASE_MAGNITUDE_FLOOR = 1e-12
# eigenvalues of a unit-trace state below this are roundoff
EIGEN_FLOOR = 1e-14

SIGMA_Y = np.array([[0, -1j], [1j, 0]])
_YY = np.kron(SIGMA_Y, SIGMA_Y)


def wrap_phase(phi: float) -> float:
    """Map an angle onto the branch (-pi, pi]."""
    wrapped = math.remainder(phi, 2 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2 * math.pi
    return wrapped


def _check_phi(phi):
    if not np.isfinite(phi):
        raise InvalidArgumentError(f"phase must be finite, got {phi!r}")
    return float(phi)


def bell_phase_state(phi: float) -> np.ndarray:
    """Density matrix of (|HV> + exp(i phi)|VH>)/sqrt(2)."""
    phi = _check_phi(phi)
    psi = np.zeros(4, dtype=complex)
    psi[HV] = 1 / math.sqrt(2)
    psi[VH] = np.exp(1j * phi) / math.sqrt(2)
    return np.outer(psi, psi.conj())


def bell_phase_vector(phi: float) -> np.ndarray:
    psi = np.zeros(4, dtype=complex)
    psi[HV] = 1 / math.sqrt(2)
    psi[VH] = np.exp(1j * _check_phi(phi)) / math.sqrt(2)
    return psi


def x_state(concurrence_target: float, phi: float) -> np.ndarray:
    """Phase-damped Bell-phase state with a prescribed concurrence.

    Populations sit on HV and VH only; the HV/VH coherence is shrunk to
    ``concurrence_target / 2`` while keeping the phase ``phi``.
    """
    phi = _check_phi(phi)
    if not 0.0 <= concurrence_target <= 1.0:
        raise InvalidArgumentError(
            f"concurrence_target must lie in [0, 1], got {concurrence_target!r}")
    rho = np.zeros((4, 4), dtype=complex)
    rho[HV, HV] = rho[VH, VH] = 0.5
    rho[HV, VH] = 0.5 * concurrence_target * np.exp(-1j * phi)
    rho[VH, HV] = np.conj(rho[HV, VH])
    return rho


def x_state_from_visibilities(hv_visibility: float, ad_visibility: float,
                              phi: float = math.pi) -> np.ndarray:
    """X-state whose noiseless fringes have the requested visibilities.

    The H/V-basis visibility is set by moving a fraction
    ``(1 - hv_visibility) / 2`` of the population evenly onto HH and VV.
    The HV/VH coherence magnitude is ``ad_visibility / 2``. That equals the
    D/A-basis visibility when ``phi = pi`` and scales with ``|cos(phi)|``
    otherwise.
    """
    phi = _check_phi(phi)
    if not 0.0 <= hv_visibility <= 1.0 or not 0.0 <= ad_visibility <= 1.0:
        raise InvalidArgumentError("visibilities must lie in [0, 1]")
    leak = (1.0 - hv_visibility) / 2
    if ad_visibility > 1.0 - leak + 1e-15:
        raise InvalidArgumentError(
            "ad_visibility cannot exceed (1 + hv_visibility) / 2 for a physical X-state")
    rho = np.zeros((4, 4), dtype=complex)
    rho[HH, HH] = rho[VV, VV] = leak / 2
    rho[HV, HV] = rho[VH, VH] = (1 - leak) / 2
    rho[HV, VH] = 0.5 * ad_visibility * np.exp(-1j * phi)
    rho[VH, HV] = np.conj(rho[HV, VH])
    return rho


def product_state(signal: str, idler: str) -> np.ndarray:
    """Projector onto a computational-basis product state, e.g. ('H', 'V')."""
    try:
        index = BASIS.index(signal + idler)
    except ValueError:
        raise InvalidArgumentError(f"unknown product state {signal + idler!r}") from None
    rho = np.zeros((4, 4), dtype=complex)
    rho[index, index] = 1.0
    return rho


def maximally_mixed() -> np.ndarray:
    return np.eye(4, dtype=complex) / 4


def mix(components) -> np.ndarray:
    """Convex combination of ``(weight, rho)`` pairs."""
    components = list(components)
    if not components:
        raise InvalidArgumentError("mix needs at least one component")
    weights = np.array([float(w) for w, _ in components])
    if np.any(~np.isfinite(weights)) or np.any(weights < 0):
        raise InvalidArgumentError("mixture weights must be finite and nonnegative")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise InvalidArgumentError(f"mixture weights sum to {weights.sum()!r}, not 1")
    out = np.zeros((4, 4), dtype=complex)
    for w, rho in zip(weights, (r for _, r in components)):
        out += w * np.asarray(rho, dtype=complex)
    return out


@dataclass(frozen=True)
class PhysicalityReport:
    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float

    @property
    def passed(self) -> bool:
        return (self.hermiticity_defect <= HERMITICITY_TOL
                and self.trace_defect <= TRACE_TOL
                and self.min_eigenvalue >= EIGENVALUE_TOL)


def validate_physical(rho) -> PhysicalityReport:
    """Measure how far ``rho`` is from a valid density matrix. Never raises."""
    rho = np.asarray(rho, dtype=complex)
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    trace = float(abs(np.trace(rho) - 1.0))
    min_eig = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min())
    return PhysicalityReport(herm, trace, min_eig)


def _require_physical(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise InvalidStateError(f"expected a 4x4 matrix, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise InvalidStateError("density matrix has non-finite entries")
    report = validate_physical(rho)
    if report.hermiticity_defect > 1e-8 or report.trace_defect > 1e-8:
        raise InvalidStateError(
            f"not a density matrix: hermiticity defect {report.hermiticity_defect:.3g}, "
            f"trace defect {report.trace_defect:.3g}")
    if report.min_eigenvalue < NONPHYSICAL_TOL:
        raise InvalidStateError(f"negative eigenvalue {report.min_eigenvalue:.3g}")
    return (rho + rho.conj().T) / 2


def _psd_sqrt(rho):
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def concurrence(rho) -> float:
    """Wootters concurrence.

    The lambdas are the singular values of tau = V^T (Y x Y) V, where the
    columns of V are the eigenvectors of rho scaled by sqrt(eigenvalue).
    They equal the square roots of the spectrum of rho . rho~ but avoid
    square-rooting roundoff-level eigenvalues of that product.
    """
    rho = _require_physical(rho)
    w, v = np.linalg.eigh(rho)
    keep = w > EIGEN_FLOOR
    if not np.any(keep):
        return 0.0
    vecs = v[:, keep] * np.sqrt(w[keep])
    tau = vecs.T @ _YY @ vecs
    lam = np.zeros(4)
    sv = np.linalg.svd(tau, compute_uv=False)
    lam[:sv.size] = sv
    return float(np.clip(lam[0] - lam[1] - lam[2] - lam[3], 0.0, 1.0))


def fidelity_to_pure(rho, target_phi: float) -> float:
    """Overlap <psi(target_phi)| rho |psi(target_phi)> with a Bell-phase state."""
    rho = _require_physical(rho)
    psi = bell_phase_vector(target_phi)
    return float(np.clip(np.real(psi.conj() @ rho @ psi), 0.0, 1.0))


def state_fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    rho = _require_physical(rho)
    sigma = _require_physical(sigma)
    root = _psd_sqrt(rho)
    inner = root @ sigma @ root
    eig = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    return float(min(1.0, np.sum(np.sqrt(np.clip(eig, 0.0, None))) ** 2))


def trace_distance(rho, sigma) -> float:
    diff = np.asarray(rho, dtype=complex) - np.asarray(sigma, dtype=complex)
    diff = (diff + diff.conj().T) / 2
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


def infer_phase(rho) -> float:
    """Two-photon phase: argument of the <VH|rho|HV> element on (-pi, pi]."""
    element = np.asarray(rho, dtype=complex)[VH, HV]
    if abs(element) <= PHASE_MAGNITUDE_FLOOR:
        raise DegeneratePhaseError(
            f"|<VH|rho|HV>| = {abs(element):.3g} is too small to define a phase")
    return wrap_phase(float(np.angle(element)))


def project_to_physical(rho) -> np.ndarray:
    """Nearest-in-spectrum physical state: Hermitize, clip negative
    eigenvalues to zero and renormalize."""
    rho = np.asarray(rho, dtype=complex)
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        return maximally_mixed()
    w /= w.sum()
    out = (v * w) @ v.conj().T
    return (out + out.conj().T) / 2


def random_density_matrix(rng: np.random.Generator, rank: int = 4) -> np.ndarray:
    """Random state from the induced (Ginibre) measure."""
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def to_json(rho) -> str:
    rho = np.asarray(rho, dtype=complex)
    payload = {
        "basis": list(BASIS),
        "elements": [[[float(z.real), float(z.imag)] for z in row] for row in rho],
    }
    return json.dumps(payload)


def from_json(text: str) -> np.ndarray:
    payload = json.loads(text)
    if list(payload.get("basis", [])) != list(BASIS):
        raise InvalidArgumentError(f"unsupported basis order {payload.get('basis')!r}")
    elements = np.array(payload["elements"], dtype=float)
    if elements.shape != (4, 4, 2):
        raise InvalidArgumentError(f"elements must be 4x4 [re, im] pairs, got {elements.shape}")
    return elements[..., 0] + 1j * elements[..., 1]
