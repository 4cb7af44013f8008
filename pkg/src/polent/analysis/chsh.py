"""CHSH correlators and S with linear polarization analyzers.

The four correlators are ordered (E(a, b), E(a, b'), E(a', b), E(a', b')),
with a, a' the signal angles and b, b' the idler angles. ``sign_assignment``
is the index of the term that is subtracted, or ``"max"`` to take whichever
placement gives the largest |S|.

Standard form with the minus on E(a, b')::

    S = |E(a, b) - E(a, b') + E(a', b) + E(a', b')|

The published angle set a=0, a'=45, b=67.5, b'=22.5 (degrees) with that
sign placement gives S = 0 for the ideal singlet under the usual convention
E = -cos 2(a - b). ``PUBLISHED_SETTINGS`` keeps it verbatim;
``CANONICAL_SETTINGS`` swaps b and b', which reaches 2*sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from ..errors import InvalidArgumentError, UndefinedCorrelatorError
from ..polarimetry import born_probability, linear_pair_projector, normalize_angle, perpendicular
from ..qstate import _require_physical

TERMS = ("ab", "ab'", "a'b", "a'b'")


@dataclass(frozen=True)
class ChshSettings:
    theta_s: float
    theta_s_prime: float
    theta_i: float
    theta_i_prime: float
    sign_assignment: int | str = 1

    def __post_init__(self):
        if self.sign_assignment != "max" and self.sign_assignment not in (0, 1, 2, 3):
            raise InvalidArgumentError(
                f"sign_assignment must be 0..3 or 'max', got {self.sign_assignment!r}")
        angles = [normalize_angle(t) for t in self.angles]
        if len({round(a, 12) for a in angles}) < 4:
            raise InvalidArgumentError("CHSH needs four distinct analyzer angles")

    @property
    def angles(self):
        return (self.theta_s, self.theta_s_prime, self.theta_i, self.theta_i_prime)

    @property
    def pairs(self):
        a, ap, b, bp = self.angles
        return ((a, b), (a, bp), (ap, b), (ap, bp))

    @classmethod
    def from_degrees(cls, a, ap, b, bp, sign_assignment=1):
        return cls(*(math.radians(x) for x in (a, ap, b, bp)), sign_assignment)

    def degrees(self):
        return tuple(math.degrees(t) for t in self.angles)


CANONICAL_SETTINGS = ChshSettings.from_degrees(0.0, 45.0, 22.5, 67.5, sign_assignment=1)
PUBLISHED_SETTINGS = ChshSettings.from_degrees(0.0, 45.0, 67.5, 22.5, sign_assignment=1)


def chsh_E(n_same, n_perp_both, n_perp_idler, n_perp_signal) -> float:
    """Correlator from N(s,i), N(s+,i+), N(s,i+), N(s+,i) where + means +90 deg."""
    counts = (n_same, n_perp_both, n_perp_idler, n_perp_signal)
    if any(n < 0 for n in counts):
        raise InvalidArgumentError("correlator counts must be nonnegative")
    total = sum(counts)
    if total <= 0:
        raise UndefinedCorrelatorError("all four counts are zero")
    return (n_same + n_perp_both - n_perp_idler - n_perp_signal) / total


def _combine(correlators, sign_assignment):
    e = np.asarray(correlators, dtype=float)
    if sign_assignment == "max":
        return max(_combine(e, k) for k in range(4))
    signs = np.ones(4)
    signs[sign_assignment] = -1.0
    return float(abs(signs @ e))


def chsh_S(settings: ChshSettings, correlators) -> float:
    """S from the four correlators ordered as ``TERMS``."""
    if len(correlators) != 4:
        raise InvalidArgumentError("need four correlators")
    return _combine(correlators, settings.sign_assignment)


def outcome_angles(theta_s, theta_i):
    """The four analyzer pairs entering one correlator, in ``chsh_E`` order."""
    sp, ip = perpendicular(theta_s), perpendicular(theta_i)
    return ((theta_s, theta_i), (sp, ip), (theta_s, ip), (sp, theta_i))


def correlators_from_rates(settings: ChshSettings, rate) -> list[float]:
    """``rate(theta_s, theta_i)`` returns a corrected rate for that pair."""
    return [chsh_E(*(rate(s, i) for s, i in outcome_angles(a, b))) for a, b in settings.pairs]


def chsh_S_from_rates(settings: ChshSettings, rate) -> float:
    return chsh_S(settings, correlators_from_rates(settings, rate))


def chsh_predict(rho, settings: ChshSettings) -> float:
    """Noiseless S from exact Born probabilities."""
    rho = _require_physical(rho)
    return chsh_S_from_rates(
        settings, lambda s, i: born_probability(rho, linear_pair_projector(s, i)))


def correlation_block(rho) -> np.ndarray:
    """2x2 block T of the correlation tensor seen by linear analyzers.

    E(a, b) = u(a) @ T @ u(b) with u(t) = (cos 2t, sin 2t), i.e. rows/columns
    are the H/V and D/A Stokes axes.
    """
    rho = _require_physical(rho)
    z = np.diag([1.0, -1.0])
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    ops = (z, x)
    return np.array([[np.trace(rho @ np.kron(p, q)).real for q in ops] for p in ops])


def _u(theta):
    return np.stack([np.cos(2 * theta), np.sin(2 * theta)], axis=-1)


def _s_from_block(T, a, ap, b, bp):
    e = [_u(x) @ T @ _u(y) for x, y in ((a, b), (a, bp), (ap, b), (ap, bp))]
    return abs(e[0] - e[1] + e[2] + e[3])


def chsh_optimize(rho, resolution_deg: float = 0.5):
    """Best linear-analyzer settings and S for ``rho``.

    Signal angles (a, a') are scanned on a grid of ``resolution_deg``; for
    each pair the idler angles have a closed-form optimum (align u(b) with
    T^T (u(a) + u(a')) and u(b') with T^T (u(a') - u(a))). The grid winner
    is then polished over all four angles. The minus sign sits on E(a, b').
    """
    rho = _require_physical(rho)
    T = correlation_block(rho)
    grid = np.deg2rad(np.arange(0.0, 180.0, resolution_deg))
    ua = _u(grid)
    plus = (ua[:, None, :] + ua[None, :, :]) @ T   # rows: a, cols: a'
    minus = (ua[None, :, :] - ua[:, None, :]) @ T
    score = np.linalg.norm(plus, axis=-1) + np.linalg.norm(minus, axis=-1)
    ia, iap = np.unravel_index(np.argmax(score), score.shape)
    a, ap = grid[ia], grid[iap]
    vb, vbp = plus[ia, iap], minus[ia, iap]
    b = 0.5 * math.atan2(vb[1], vb[0])
    bp = 0.5 * math.atan2(vbp[1], vbp[0])

    res = optimize.minimize(lambda x: -_s_from_block(T, *x), np.array([a, ap, b, bp]),
                            method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    x = res.x if -res.fun >= _s_from_block(T, a, ap, b, bp) else np.array([a, ap, b, bp])
    try:
        best = ChshSettings(*(normalize_angle(t) for t in x), sign_assignment=1)
    except InvalidArgumentError:
        # coincident angles happen only when T has rank <= 1; keep the grid point
        best = _distinct_fallback(T, x)
    s_best = chsh_predict(rho, best)
    s_canon = chsh_predict(rho, CANONICAL_SETTINGS)
    if s_canon > s_best:
        return CANONICAL_SETTINGS, s_canon
    return best, s_best


def _distinct_fallback(T, x):
    a, ap, b, bp = (normalize_angle(t) for t in x)
    eps = math.radians(1e-3)
    angles = [a, ap, b, bp]
    for k in range(1, 4):
        while any(abs(angles[k] - angles[j]) < 1e-9 for j in range(k)):
            angles[k] = normalize_angle(angles[k] + eps)
    return ChshSettings(*angles, sign_assignment=1)


def with_sign(settings: ChshSettings, sign_assignment) -> ChshSettings:
    return replace(settings, sign_assignment=sign_assignment)
