"""Polarization-correlation fringes: sinusoid fits and visibilities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import FitDegenerateError, InvalidArgumentError, UndefinedVisibilityError
from ..polarimetry import normalize_angle

MIN_DISTINCT_ANGLES = 6
DEGENERACY_SIGMAS = 3.0


@dataclass(frozen=True)
class FringeScan:
    basis: str
    theta_s: float
    theta_i: tuple[float, ...]
    rates: tuple[float, ...]
    times: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.theta_i) != len(self.rates):
            raise InvalidArgumentError("theta_i and rates must have equal length")
        if self.times is not None and len(self.times) != len(self.rates):
            raise InvalidArgumentError("times must align with rates")
        angles = sorted({round(normalize_angle(t), 12) for t in self.theta_i})
        if len(angles) < MIN_DISTINCT_ANGLES:
            raise InvalidArgumentError(
                f"fringe scan needs >= {MIN_DISTINCT_ANGLES} distinct idler angles, got {len(angles)}")
        # coverage on the pi-periodic circle: pi minus the widest empty gap
        gaps = np.diff(angles + [angles[0] + math.pi])
        if math.pi - gaps.max() < math.pi / 2 - 1e-9:
            raise InvalidArgumentError("fringe scan must span at least half a period (90 degrees)")


@dataclass(frozen=True)
class FringeFit:
    """rate(theta) = offset + amplitude * cos(2 (theta - theta0))."""
    offset: float
    amplitude: float
    theta0: float
    visibility: float
    residual_ss: float
    amplitude_stderr: float
    degenerate: bool

    def __call__(self, theta):
        return self.offset + self.amplitude * np.cos(2 * (np.asarray(theta) - self.theta0))


def fit_fringe(scan: FringeScan) -> FringeFit:
    """Linear least squares in (offset, cos 2theta, sin 2theta); the period
    is fixed by the physics and not fitted."""
    theta = np.asarray(scan.theta_i, dtype=float)
    y = np.asarray(scan.rates, dtype=float)
    X = np.column_stack([np.ones_like(theta), np.cos(2 * theta), np.sin(2 * theta)])
    if np.linalg.matrix_rank(X) < 3:
        raise FitDegenerateError("idler angles do not constrain a 2-theta sinusoid")
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    a, c, s = coef
    if a <= 0:
        raise FitDegenerateError(f"fitted offset {a:.3g} is not positive")
    resid = y - X @ coef
    rss = float(resid @ resid)
    dof = len(y) - 3
    cov = (rss / dof if dof > 0 else 0.0) * np.linalg.inv(X.T @ X)
    b = math.hypot(c, s)
    if b > 0:
        grad = np.array([c, s]) / b
        b_err = math.sqrt(max(0.0, grad @ cov[1:, 1:] @ grad))
    else:
        b_err = math.sqrt(max(0.0, (cov[1, 1] + cov[2, 2]) / 2))
    theta0 = normalize_angle(0.5 * math.atan2(s, c))
    return FringeFit(
        offset=float(a),
        amplitude=float(b),
        theta0=theta0,
        visibility=float(min(1.0, b / a)),
        residual_ss=rss,
        amplitude_stderr=float(b_err),
        degenerate=bool(b <= DEGENERACY_SIGMAS * b_err),
    )


def visibility_from_extrema(n_max: float, n_min: float) -> float:
    if n_min < 0 or n_max < n_min:
        raise InvalidArgumentError("need n_max >= n_min >= 0")
    if n_max == 0:
        raise UndefinedVisibilityError("both extrema are zero")
    return (n_max - n_min) / (n_max + n_min)
