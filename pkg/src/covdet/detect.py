"""Joint activity and delay detectors.

Two detectors over the same covariance-matching objective:

* ``run_cd_e``: plain coordinate descent over all (device, delay)
  coordinates, then a per-device keep-max enforcement pass, then
  thresholding.
* ``run_bcd``: block coordinate descent that re-optimizes one device's
  delay block at a time, keeping at most one nonzero delay per device
  at every step, then thresholding.

Both maintain Sigma^{-1} by rank-one updates and the objective by
closed-form increments, with a periodic dense refresh.
"""

from __future__ import annotations

import math

import numpy as np

from . import likelihood
from .likelihood import DENOMINATOR_GUARD
from .siggen import effective_dictionary
from .sysmodel import (
    ConvergenceError,
    DetectionResult,
    GammaEstimate,
    NumericalDegeneracyError,
    PreambleSet,
    SystemConfig,
    validate,
)

# hard cap on outer sweeps; exceeding it raises instead of returning silently
MAX_SWEEPS = 1000
# dense Sigma^{-1} / objective refresh cadence, in full sweeps
RECOMPUTE_EVERY = 10


def enforce_block_sparsity(gamma: GammaEstimate) -> GammaEstimate:
    """Keep only each device's maximal gamma entry, zeroing the rest.

    Ties go to the smallest delay. All-zero blocks stay all-zero.
    """
    values = gamma.values
    out = np.zeros_like(values)
    best = np.argmax(values, axis=1)  # first occurrence wins ties
    rows = np.arange(values.shape[0])
    out[rows, best] = values[rows, best]
    return GammaEstimate(out)


def threshold(gamma: GammaEstimate, t: float) -> GammaEstimate:
    """Zero out entries below ``t``; entries >= t survive (inclusive)."""
    if t <= 0:
        raise ValueError(f"threshold must be positive, got {t}")
    return GammaEstimate(np.where(gamma.values >= t, gamma.values, 0.0))


def to_indicators(gamma: GammaEstimate) -> frozenset:
    """Detected (device, delay) pairs: coordinates with gamma > 0.

    Requires a block-sparse estimate so each device maps to one delay.
    """
    if not gamma.is_block_sparse():
        raise ValueError("indicator extraction requires a block-sparse estimate")
    return frozenset((int(n), int(tau)) for n, tau in np.argwhere(gamma.values > 0.0))


def _prepare(preambles: PreambleSet, sigma_tilde, config: SystemConfig):
    """Shared detector setup: dimension checks, dictionary, fresh state."""
    validate(config, allow_inactive=True)
    if preambles.preamble_len != config.preamble_len:
        raise ValueError(
            f"preamble length {preambles.preamble_len} does not match "
            f"config preamble_len {config.preamble_len}"
        )
    if preambles.num_devices != config.num_devices:
        raise ValueError(
            f"preamble count {preambles.num_devices} does not match "
            f"config num_devices {config.num_devices}"
        )
    st = np.asarray(getattr(sigma_tilde, "matrix", sigma_tilde), dtype=np.complex128)
    if st.shape != (config.window_len, config.window_len):
        raise ValueError(
            f"sample covariance shape {st.shape} does not match "
            f"window length {config.window_len}"
        )
    dictionary = effective_dictionary(preambles, config.max_delay)
    state = likelihood.init_state(dictionary, config.sigma2, st, config.num_delays)
    return dictionary, st, state


def run_cd_e(
    preambles: PreambleSet,
    sigma_tilde,
    config: SystemConfig,
    *,
    recompute_every: int = RECOMPUTE_EVERY,
    shuffle_rng: np.random.Generator | None = None,
) -> DetectionResult:
    """Coordinate descent over all coordinates, then enforcement.

    Sweeps every (device, delay) coordinate in ascending order (or a
    per-sweep random order when ``shuffle_rng`` is given), applying the
    closed-form step and the rank-one inverse update, until one full
    sweep improves the objective by at most ``config.convergence_delta``.
    The relaxed estimate is then reduced to one delay per device
    (keep-max), thresholded at ``config.threshold_cd``, and converted to
    indicator pairs.
    """
    dictionary, st, state = _prepare(preambles, sigma_tilde, config)
    num_columns = dictionary.shape[1]
    gamma_values = state.gamma.values.ravel()

    trace = [state.objective]
    for sweep in range(1, MAX_SWEEPS + 1):
        if shuffle_rng is None:
            column_order = range(num_columns)
        else:
            column_order = shuffle_rng.permutation(num_columns)
        inv = state.inv_sigma
        objective = state.objective
        for j in column_order:
            s = dictionary[:, j]
            v = inv @ s
            quad = float(np.real(np.vdot(s, v)))
            if quad <= 0.0:
                raise NumericalDegeneracyError(
                    f"s^H Sigma^-1 s = {quad} <= 0 at column {j}"
                )
            fit = float(np.real(np.vdot(v, st @ v)))
            eta = max((fit - quad) / (quad * quad), -gamma_values[j])
            if eta == 0.0:
                continue
            denom = 1.0 + eta * quad
            if denom < DENOMINATOR_GUARD:
                raise NumericalDegeneracyError(
                    f"update denominator {denom} below guard at column {j}"
                )
            objective += math.log1p(eta * quad) - eta * fit / denom
            inv -= (eta / denom) * np.outer(v, v.conj())
            gamma_values[j] = max(gamma_values[j] + eta, 0.0)
        state.objective = objective
        if sweep % recompute_every == 0:
            likelihood.refresh_state(state, st)
        trace.append(state.objective)
        if trace[-2] - trace[-1] <= config.convergence_delta:
            break
    else:
        raise ConvergenceError(
            f"no convergence within {MAX_SWEEPS} sweeps "
            f"(last decrement {trace[-2] - trace[-1]:.3e})"
        )

    gamma_hat = threshold(enforce_block_sparsity(state.gamma), config.threshold_cd)
    return DetectionResult(
        theta_hat=to_indicators(gamma_hat),
        gamma_hat=gamma_hat,
        iterations=sweep,
        final_objective=trace[-1],
        objective_trace=np.asarray(trace),
    )


def run_bcd(
    preambles: PreambleSet,
    sigma_tilde,
    config: SystemConfig,
    *,
    recompute_every: int = RECOMPUTE_EVERY,
    shuffle_rng: np.random.Generator | None = None,
    block_audit=None,
) -> DetectionResult:
    """Block coordinate descent with one delay per device by construction.

    For each device block: the block's current nonzero entry (if any) is
    removed with one rank-one downdate; each candidate delay is then
    scored speculatively from that zeroed state with its own closed-form
    optimum and objective increment; the candidate with minimal objective
    is committed (ties to the smallest delay). Because re-inserting the
    removed entry is always among the candidates, a block pass never
    increases the objective. Stops when a full pass over all blocks
    improves the objective by at most ``config.convergence_delta``, then
    thresholds at ``config.threshold_bcd``. No enforcement pass is
    needed.

    ``block_audit``, if given, is called with the gamma matrix after
    every block commit (testing hook for the one-per-block invariant).
    """
    dictionary, st, state = _prepare(preambles, sigma_tilde, config)
    num_delays = config.num_delays
    num_devices = config.num_devices
    gamma_values = state.gamma.values

    trace = [state.objective]
    for sweep in range(1, MAX_SWEEPS + 1):
        if shuffle_rng is None:
            block_order = range(num_devices)
        else:
            block_order = shuffle_rng.permutation(num_devices)
        inv = state.inv_sigma
        objective = state.objective
        for n in block_order:
            base = n * num_delays
            row = gamma_values[n]
            # downdate the block's existing entry, if any, to reach the
            # zeroed reference state shared by all candidates
            old_tau = int(np.argmax(row))
            old_value = row[old_tau]
            if old_value > 0.0:
                s = dictionary[:, base + old_tau]
                v = inv @ s
                quad = float(np.real(np.vdot(s, v)))
                eta = -float(old_value)
                denom = 1.0 + eta * quad
                if denom < DENOMINATOR_GUARD:
                    raise NumericalDegeneracyError(
                        f"downdate denominator {denom} below guard at device {n}"
                    )
                fit = float(np.real(np.vdot(v, st @ v)))
                objective += math.log1p(eta * quad) - eta * fit / denom
                inv -= (eta / denom) * np.outer(v, v.conj())
                row[old_tau] = 0.0
            # speculative candidates: optimal step and objective change
            # per delay, all measured from the zeroed state
            best_tau = -1
            best_eta = 0.0
            best_delta = 0.0  # the keep-empty candidate
            best_v = None
            best_quad = 0.0
            for tau in range(num_delays):
                s = dictionary[:, base + tau]
                v = inv @ s
                quad = float(np.real(np.vdot(s, v)))
                if quad <= 0.0:
                    raise NumericalDegeneracyError(
                        f"s^H Sigma^-1 s = {quad} <= 0 at device {n}, delay {tau}"
                    )
                fit = float(np.real(np.vdot(v, st @ v)))
                eta = (fit - quad) / (quad * quad)
                if eta <= 0.0:
                    continue
                delta = math.log1p(eta * quad) - eta * fit / (1.0 + eta * quad)
                if delta < best_delta:
                    best_tau, best_eta, best_delta = tau, eta, delta
                    best_v, best_quad = v, quad
            if best_tau >= 0:
                denom = 1.0 + best_eta * best_quad
                if denom < DENOMINATOR_GUARD:
                    raise NumericalDegeneracyError(
                        f"commit denominator {denom} below guard at device {n}"
                    )
                objective += best_delta
                inv -= (best_eta / denom) * np.outer(best_v, best_v.conj())
                row[best_tau] = best_eta
            if block_audit is not None:
                block_audit(gamma_values)
        state.objective = objective
        if sweep % recompute_every == 0:
            likelihood.refresh_state(state, st)
        trace.append(state.objective)
        if trace[-2] - trace[-1] <= config.convergence_delta:
            break
    else:
        raise ConvergenceError(
            f"no convergence within {MAX_SWEEPS} sweeps "
            f"(last decrement {trace[-2] - trace[-1]:.3e})"
        )

    gamma_hat = threshold(GammaEstimate(gamma_values.copy()), config.threshold_bcd)
    return DetectionResult(
        theta_hat=to_indicators(gamma_hat),
        gamma_hat=gamma_hat,
        iterations=sweep,
        final_objective=trace[-1],
        objective_trace=np.asarray(trace),
    )
