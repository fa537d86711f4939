"""Covariance-matching ML machinery.

The fit objective is ``log det(Sigma) + trace(Sigma^{-1} S_tilde)`` where
``Sigma = sum_j gamma_j s_j s_j^H + sigma2 I`` over dictionary columns
``s_j`` and ``S_tilde`` is the sample covariance. Everything here works
on one tracked ``CovarianceState``: closed-form single-coordinate steps,
Sherman-Morrison maintenance of ``Sigma^{-1}``, and matching closed-form
objective increments, plus a dense refresh to bound accumulated drift.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from .sysmodel import (
    CovarianceState,
    GammaEstimate,
    NumericalDegeneracyError,
    PreambleSet,
)

# 1 + eta * s^H Sigma^{-1} s below this is treated as a degenerate update
DENOMINATOR_GUARD = 1e-12


def _as_matrix(mat) -> np.ndarray:
    """Accept a bare ndarray or any wrapper exposing ``.matrix``."""
    return np.asarray(getattr(mat, "matrix", mat), dtype=np.complex128)


def assemble_dictionary_covariance(
    dictionary: np.ndarray, gamma_flat: np.ndarray, sigma2: float
) -> np.ndarray:
    """Dense model covariance from an effective dictionary and flat gammas."""
    if np.any(gamma_flat < 0):
        raise ValueError("gamma entries must be non-negative")
    scaled = dictionary * gamma_flat  # scales each column
    cov = scaled @ dictionary.conj().T
    cov[np.diag_indices_from(cov)] += sigma2
    return (cov + cov.conj().T) / 2.0


def assemble_covariance(preambles: PreambleSet, gamma: GammaEstimate, sigma2: float) -> np.ndarray:
    """Model covariance: sum of gamma-weighted delayed-signature outer
    products plus ``sigma2`` on the diagonal."""
    from .siggen import effective_dictionary  # local import avoids cycle

    dictionary = effective_dictionary(preambles, gamma.num_delays - 1)
    return assemble_dictionary_covariance(dictionary, gamma.values.ravel(), sigma2)


def evaluate_objective(mat: np.ndarray, sigma_tilde, *, inverse: bool = False) -> float:
    """Fit objective ``log det(Sigma) + trace(Sigma^{-1} S_tilde)``.

    ``mat`` is the model covariance, or its inverse when ``inverse=True``.
    The log-determinant always comes from a Cholesky factor (sum of log
    diagonal entries), never from a raw determinant.
    """
    mat = np.asarray(mat, dtype=np.complex128)
    st = _as_matrix(sigma_tilde)
    try:
        if inverse:
            chol = np.linalg.cholesky(mat)
            log_det = -2.0 * float(np.sum(np.log(np.real(np.diag(chol)))))
            trace_term = float(np.real(np.vdot(st, mat)))
        else:
            factor = scipy.linalg.cho_factor(mat, lower=True)
            log_det = 2.0 * float(np.sum(np.log(np.real(np.diag(factor[0])))))
            trace_term = float(np.real(np.trace(scipy.linalg.cho_solve(factor, st))))
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(f"covariance not positive definite: {exc}") from exc
    return log_det + trace_term


def init_state(
    dictionary: np.ndarray, sigma2: float, sigma_tilde, num_delays: int = 1
) -> CovarianceState:
    """Fresh state at gamma = 0: inverse is I/sigma2 and the objective is
    ``D log(sigma2) + trace(S_tilde)/sigma2``.

    ``num_delays`` fixes the gamma block width; dictionary columns are
    device-major, delay-minor.
    """
    st = _as_matrix(sigma_tilde)
    dim, num_columns = dictionary.shape
    if st.shape != (dim, dim):
        raise ValueError(
            f"sample covariance shape {st.shape} does not match window length {dim}"
        )
    if num_delays < 1 or num_columns % num_delays != 0:
        raise ValueError(
            f"dictionary has {num_columns} columns, not divisible into "
            f"blocks of {num_delays}"
        )
    inv = np.eye(dim, dtype=np.complex128) / sigma2
    objective = dim * math.log(sigma2) + float(np.real(np.trace(st))) / sigma2
    gamma = GammaEstimate(np.zeros((num_columns // num_delays, num_delays)))
    return CovarianceState(
        dictionary=dictionary, sigma2=sigma2, inv_sigma=inv, objective=objective, gamma=gamma
    )


def quadratic_terms(state: CovarianceState, sigma_tilde, device: int, delay: int):
    """The two quadratic forms behind every coordinate formula.

    Returns ``(v, quad, fit)`` with ``v = Sigma^{-1} s``,
    ``quad = s^H Sigma^{-1} s`` and ``fit = s^H Sigma^{-1} S_tilde Sigma^{-1} s``.
    """
    st = _as_matrix(sigma_tilde)
    s = state.column(device, delay)
    v = state.inv_sigma @ s
    quad = float(np.real(np.vdot(s, v)))
    if quad <= 0.0:
        raise NumericalDegeneracyError(
            f"s^H Sigma^-1 s = {quad} <= 0 at device {device}, delay {delay}"
        )
    fit = float(np.real(np.vdot(v, st @ v)))
    return v, quad, fit


def coordinate_step(state: CovarianceState, sigma_tilde, device: int, delay: int) -> float:
    """Closed-form minimizer of the one-coordinate objective restriction.

    Returns the step ``eta`` such that ``gamma[device, delay] + eta`` is
    the non-negative minimizer along this coordinate:
    ``max{(fit - quad)/quad^2, -gamma[device, delay]}``.
    """
    _, quad, fit = quadratic_terms(state, sigma_tilde, device, delay)
    current = float(state.gamma.values[device, delay])
    return max((fit - quad) / (quad * quad), -current)


def objective_delta(
    state: CovarianceState, sigma_tilde, device: int, delay: int, eta: float
) -> float:
    """Exact objective change of adding ``eta`` on one coordinate.

    Matrix-determinant lemma plus Sherman-Morrison give
    ``log(1 + eta*quad) - eta*fit/(1 + eta*quad)`` without touching the
    dense objective.
    """
    if eta == 0.0:
        return 0.0
    _, quad, fit = quadratic_terms(state, sigma_tilde, device, delay)
    denom = 1.0 + eta * quad
    if denom < DENOMINATOR_GUARD:
        raise NumericalDegeneracyError(f"update denominator {denom} below guard")
    return math.log1p(eta * quad) - eta * fit / denom


def rank_one_inverse_update(
    state: CovarianceState, device: int, delay: int, eta: float
) -> None:
    """Apply ``gamma[device, delay] += eta`` to the tracked inverse in place.

    Sherman-Morrison: ``Sigma^{-1} -= eta * v v^H / (1 + eta * quad)``
    with ``v = Sigma^{-1} s``. The objective field is not touched; callers
    track it via :func:`objective_delta` (computed before this update).
    """
    if eta == 0.0:
        return
    s = state.column(device, delay)
    v = state.inv_sigma @ s
    quad = float(np.real(np.vdot(s, v)))
    denom = 1.0 + eta * quad
    if denom < DENOMINATOR_GUARD:
        raise NumericalDegeneracyError(f"update denominator {denom} below guard")
    new_value = float(state.gamma.values[device, delay]) + eta
    if new_value < 0.0:
        if new_value < -1e-12:
            raise ValueError(f"update would drive gamma negative ({new_value})")
        new_value = 0.0
    state.inv_sigma -= (eta / denom) * np.outer(v, v.conj())
    state.gamma.values[device, delay] = new_value


def refresh_state(state: CovarianceState, sigma_tilde) -> None:
    """Recompute ``inv_sigma`` and ``objective`` from a dense factorization.

    Called every few sweeps to wipe out accumulated rank-one roundoff.
    """
    st = _as_matrix(sigma_tilde)
    cov = assemble_dictionary_covariance(
        state.dictionary, state.gamma.values.ravel(), state.sigma2
    )
    try:
        factor = scipy.linalg.cho_factor(cov, lower=True)
        inv = scipy.linalg.cho_solve(factor, np.eye(state.dim, dtype=np.complex128))
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(f"dense refresh failed: {exc}") from exc
    state.inv_sigma = (inv + inv.conj().T) / 2.0
    log_det = 2.0 * float(np.sum(np.log(np.real(np.diag(factor[0])))))
    state.objective = log_det + float(np.real(np.vdot(st, state.inv_sigma)))
