"""
Coordinate descent anatomy
==========================

Opens up one detection run: the covariance-fit objective, the
closed-form single-coordinate step, the rank-one inverse update that
makes each step cheap, and the two detectors built from those pieces.
"""

import numpy as np

from covdet import (
    SystemConfig,
    coordinate_step,
    draw_ground_truth,
    effective_dictionary,
    generate_preambles,
    init_state,
    objective_delta,
    rank_one_inverse_update,
    run_bcd,
    run_cd_e,
    sample_covariance,
    synthesize_received_signal,
)

config = SystemConfig(
    num_devices=10,
    num_active=3,
    preamble_len=16,
    max_delay=2,
    num_antennas=128,
    tx_power_dbm=23.0,
    noise_psd_dbm_hz=-169.0,
    bandwidth_hz=1e7,
    cell_distance_km=1.0,
    convergence_delta=1e-3,
    threshold_cd=0.1,
    threshold_bcd=0.12,
    rng_seed=3,
)
rng = np.random.default_rng(config.rng_seed)
preambles = generate_preambles(config, rng)
truth = draw_ground_truth(config, rng)
received = synthesize_received_signal(preambles, truth, config, rng)
sigma_tilde = sample_covariance(received)
print("truth:", sorted(truth.pairs))

# The optimizer state tracks the inverse model covariance and the
# objective value; it starts from the all-inactive model (noise only).
dictionary = effective_dictionary(preambles, config.max_delay)
state = init_state(dictionary, config.sigma2, sigma_tilde, config.num_delays)
print(f"\nobjective with nothing detected: {state.objective:.4f}")

# Take the optimal step on a few coordinates by hand. Each step has a
# closed form, and updating the tracked inverse is a rank-one
# correction rather than a fresh matrix inversion.
for device, delay in sorted(truth.pairs):
    eta = coordinate_step(state, sigma_tilde, device, delay)
    drop = objective_delta(state, sigma_tilde, device, delay, eta)
    rank_one_inverse_update(state, device, delay, eta)
    state.objective += drop
    print(f"  step on ({device}, {delay}): power += {eta:.4f}, "
          f"objective {state.objective:.4f} ({drop:+.4f})")

# The entrywise detector sweeps every (device, delay) coordinate until
# a full sweep barely moves the objective, then keeps each device's
# strongest delay and thresholds.
cd = run_cd_e(preambles, sigma_tilde, config)
print(f"\nentrywise sweep detector: {cd.iterations} sweeps, "
      f"objective {cd.final_objective:.4f}")
print("  declared:", sorted(cd.theta_hat))

# The block detector re-optimizes one device at a time, never letting a
# device hold two delays at once, which suppresses the split-power
# false alarms the entrywise pass can leave behind.
bcd = run_bcd(preambles, sigma_tilde, config)
print(f"block detector: {bcd.iterations} passes, "
      f"objective {bcd.final_objective:.4f}")
print("  declared:", sorted(bcd.theta_hat))

# Both traces decrease monotonically; the block detector reaches a
# slightly different stationary point of the same objective.
print("\nsweep-by-sweep objective:")
print("  entrywise:", ", ".join(f"{v:.3f}" for v in cd.objective_trace))
print("  block:    ", ", ".join(f"{v:.3f}" for v in bcd.objective_trace))
