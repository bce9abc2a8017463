"""Equilibrium collision rates and the mean free time for Nε² = 1."""
import math

import numpy as np

from hsclusters import collision_rate_maxwellian, equilibrium_mean_free_time, mean_collision_rate

beta = 3.0  # energy 1/2 per particle
sigma = 1 / math.sqrt(beta)
print(f"tau(E=1/2) = {equilibrium_mean_free_time(0.5):.5f}")
print(f"tau(E=2)   = {equilibrium_mean_free_time(2.0):.5f}")
print(f"1 / <R>    = {1 / mean_collision_rate(beta):.5f}")

# slow particles are hit by the thermal background, fast ones sweep it up
for s in np.array([0, 0.5, 1, 2, 5, 50]) * sigma:
    r = collision_rate_maxwellian([s, 0, 0], beta)
    print(f"|v| = {s:7.3f}  R = {r:8.4f}  R / (pi |v|) = {r / (math.pi * s) if s else float('nan'):.4f}")
