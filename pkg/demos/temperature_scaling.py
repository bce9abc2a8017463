"""Doubling every velocity replays the same collision history twice as fast.

With positions fixed, scaling velocities by c maps each collision time t_m
to t_m / c and leaves partners and impact directions untouched. Case 3 is
Case 1 with c = 2, so its clusters at time t are Case 1's at time 2t.
"""
import numpy as np

from hsclusters import (SimConfig, VelocityDistribution, all_clusters, make_initial_condition,
                        rng_stream, run)

N = 1802
ic = make_initial_condition(N, VelocityDistribution.case1(), rng_stream(3))
base = run(SimConfig(N, t_end=2.0, cells=True), ic)
fast = run(SimConfig(N, t_end=1.0, cells=True), ic.scaled(2.0))

print("records:", base.m_c, fast.m_c)
print("partners identical:", np.array_equal(base.log.p, fast.log.p) and
      np.array_equal(base.log.q, fast.log.q))
print("directions identical:", np.array_equal(base.log.omega, fast.log.omega))
print("times exactly halved:", np.array_equal(base.log.t, 2 * fast.log.t))
for t in (0.5, 1.0):
    print(f"<K> fast at t={t}: {all_clusters(fast.log, N, t).mean():.4f}   "
          f"<K> base at t={2 * t}: {all_clusters(base.log, N, 2 * t).mean():.4f}")
