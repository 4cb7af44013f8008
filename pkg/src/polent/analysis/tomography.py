"""Two-qubit state reconstruction from the 16-setting count table."""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from ..counting import CountRecord, correct_counts
from ..errors import ConfigurationError, ConvergenceError, InvalidArgumentError
from ..polarimetry import TOMOGRAPHY_LABELS, gram_matrix, measurement_matrix, tomography_settings
from ..qstate import project_to_physical

GRAM_CONDITION_LIMIT = 1e12
GRADIENT_TOL = 1e-8
STEP_TOL = 1e-12
SEED_MIXING = 1e-8


def align_records(records) -> list[CountRecord]:
    """Order records by the canonical label table; labels must be a bijection."""
    records = list(records)
    by_label = {}
    for r in records:
        if r.label in by_label:
            raise InvalidArgumentError(f"duplicate tomography label {r.label!r}")
        by_label[r.label] = r
    if len(records) != 16 or set(by_label) != set(TOMOGRAPHY_LABELS):
        missing = sorted(set(TOMOGRAPHY_LABELS) - set(by_label))
        extra = sorted(set(by_label) - set(TOMOGRAPHY_LABELS))
        raise InvalidArgumentError(
            f"tomography needs the 16 canonical labels (missing {missing}, unexpected {extra})")
    return [by_label[label] for label in TOMOGRAPHY_LABELS]


def combine_repeats(records) -> list[CountRecord]:
    """Merge records sharing a label by summing counts and times."""
    merged = {}
    for r in records:
        if r.label in merged:
            m = merged[r.label]
            merged[r.label] = CountRecord(
                r.label, r.theta_s, r.theta_i, m.raw_counts + r.raw_counts,
                m.acquisition_time + r.acquisition_time, r.singles_signal, r.singles_idler)
        else:
            merged[r.label] = r
    return list(merged.values())


def linear_inversion(rates) -> np.ndarray:
    """Solve tr(M P_k) = rate_k for M and normalize to unit trace."""
    settings = tomography_settings()
    G = gram_matrix(settings)
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > GRAM_CONDITION_LIMIT:
        raise ConfigurationError(f"tomography Gram matrix is singular (condition {cond:.3g})")
    A = measurement_matrix(settings)
    vec = A.conj().T @ np.linalg.solve(G, np.asarray(rates, dtype=float))
    M = vec.reshape(4, 4)
    M = (M + M.conj().T) / 2
    tr = np.trace(M).real
    if tr <= 0:
        raise InvalidArgumentError("tomography rates carry no signal")
    return M / tr


def tomography_linear(records, tau: float = 0.0) -> np.ndarray:
    """Linear-inversion estimate; Hermitian with unit trace but not always PSD."""
    records = align_records(records)
    return linear_inversion([correct_counts(r, tau) for r in records])


class _Likelihood:
    """Poisson negative log-likelihood with the overall intensity profiled out.

    Per-setting expectation is t_k * tr(M P_k) for an unnormalized M = T^H T
    with T upper triangular; the value is divided by the total count so
    tolerances do not scale with statistics.
    """

    def __init__(self, counts, times):
        self.counts = np.asarray(counts, dtype=float)
        self.times = np.asarray(times, dtype=float)
        self.total = self.counts.sum()
        if self.total <= 0:
            raise InvalidArgumentError("tomography counts are all zero")
        self.projs = np.array([s.projector for s in tomography_settings()])
        self._iu = np.triu_indices(4)
        self._off = self._iu[0] != self._iu[1]

    def unpack(self, x):
        T = np.zeros((4, 4), dtype=complex)
        T[self._iu] = x[:10]
        T[self._iu[0][self._off], self._iu[1][self._off]] += 1j * x[10:]
        return T

    def pack(self, T):
        vals = T[self._iu]
        return np.concatenate([vals.real, vals[self._off].imag])

    def state(self, x):
        T = self.unpack(x)
        M = T.conj().T @ T
        return M / np.trace(M).real

    def value_and_grad(self, x):
        T = self.unpack(x)
        M = T.conj().T @ T
        p = np.einsum("ij,kji->k", M, self.projs).real
        p = np.maximum(p, 1e-300)
        weighted = self.times @ p
        mask = self.counts > 0
        f = (-(self.counts[mask] @ np.log(p[mask])) + self.total * math.log(weighted)) / self.total
        coef = self.total * self.times / weighted
        coef[mask] -= self.counts[mask] / p[mask]
        G = np.einsum("k,kij->ij", coef, self.projs) / self.total
        D = 2 * (T @ G)
        grad = self.pack(D)
        return f, grad

    def value(self, rho):
        p = np.maximum(np.einsum("ij,kji->k", rho, self.projs).real, 1e-300)
        mask = self.counts > 0
        return float((-(self.counts[mask] @ np.log(p[mask]))
                      + self.total * math.log(self.times @ p)) / self.total)


def _seed_factor(rho):
    rho = (1 - SEED_MIXING) * rho + SEED_MIXING * np.eye(4) / 4
    L = np.linalg.cholesky(rho)
    return L.conj().T


def tomography_mle(records, tau: float = 0.0, max_iter: int = 5000) -> np.ndarray:
    """Maximum-likelihood state, physical by construction.

    Seeded from the linear-inversion estimate projected onto the physical
    set. Corrected (accidental-subtracted) counts enter the likelihood.
    """
    records = align_records(records)
    rates = np.array([correct_counts(r, tau) for r in records])
    times = np.array([r.acquisition_time for r in records])
    like = _Likelihood(rates * times, times)
    seed_rho = project_to_physical(linear_inversion(rates))
    x0 = like.pack(_seed_factor(seed_rho))

    res = optimize.minimize(like.value_and_grad, x0, jac=True, method="BFGS",
                            options={"gtol": GRADIENT_TOL, "maxiter": max_iter,
                                     "xrtol": STEP_TOL})
    grad_norm = float(np.linalg.norm(res.jac))
    rho = like.state(res.x)
    if like.value(rho) > like.value(seed_rho):
        rho = seed_rho
    # status 2: the line search can no longer shorten the step, i.e. the
    # iterate stopped moving at machine resolution
    if grad_norm < GRADIENT_TOL or res.status in (0, 2):
        return rho
    raise ConvergenceError(
        f"MLE did not converge after {res.nit} iterations (|grad| = {grad_norm:.3g})", best=rho)
