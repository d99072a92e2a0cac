"""A tour of the user-association environment and its exhaustive oracle.

Two base stations sit 500 m apart along a road, 100 m off it; three users
drop uniformly on the road and each BS can serve at most two of them. The
status is the 3x2 matrix of received SNRs; the oracle enumerates all 2^3
assignments and keeps the best feasible one.
"""

import numpy as np

from pdlearn.envs import UserAssocEnv

env = UserAssocEnv()
rng = np.random.default_rng(0)

print("BS x-positions [m]:", env.bs_x, " road offset [m]:", env.config.bs_road_offset)
print(f"tx power {env.tx_power_dbm:.2f} dBm, noise {env.noise_dbm:.1f} dBm\n")

positions = env.sample_positions(rng)
snr = env.snr_from_positions(positions)
print("user positions [m]:", positions.round(1))
print("SNR matrix [dB]:")
print((10 * np.log10(snr)).round(2))

assoc, rate = env.oracle(snr)
obs = env.observe(snr, assoc)
print("\noracle association (user -> BS):", assoc)
print(f"sum rate: {rate/1e6:.1f} Mbit/s, per-BS load minus capacity: {obs.instant_constraints}")

# how often does capacity actually bind at the optimum?
statuses = env.sample_status(rng, 20_000)
assocs, rates = env.oracle_batch(statuses)
greedy = statuses.argmax(axis=2)  # per-user best SNR, ignoring capacity
binding = (assocs != greedy).any(axis=1).mean()
print(f"\nover 20k statuses: capacity changes the greedy choice in {binding:.1%} of them")
print(f"mean optimal sum rate: {rates.mean()/1e6:.1f} Mbit/s")

# a greedy (capacity-blind) policy violates exactly when all users share a side
viol = np.stack([env.capacity_violation(a) for a in greedy[:2000]])
print(f"greedy violation probability: {(viol > 0).any(axis=1).mean():.3f} (2*(1/2)^3 = 0.25)")
