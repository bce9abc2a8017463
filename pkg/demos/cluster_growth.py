"""Backward clusters in a single 1802-particle run.

Each particle's cluster is the set of particles that reached it through a
time-ordered chain of collisions. Its size grows roughly like exp(r t);
the Maxwell model with unit collision rate gives exactly exp(t) - 1.
"""
import numpy as np

from hsclusters import (SimConfig, VelocityDistribution, cluster_sizes, histogram,
                        make_initial_condition, maxwell_mean_K, mean_free_time_estimate,
                        rate_statistic, rng_stream, run)

N = 1802
times = [0.1, 0.25, 0.5, 1.0, 1.5, 2.0]
ic = make_initial_condition(N, VelocityDistribution.case1(), rng_stream(1))
print(f"realized energy per particle {ic.realized_energy:.4f} (nominal 0.5)")

res = run(SimConfig(N, t_end=2.0, sample_times=times, cells=True), ic)
tau = mean_free_time_estimate(N, 2.0, res.m_c)
print(f"{res.m_c} pair collisions, {res.n_wall_events} wall bounces, tau_hat = {tau:.4f}")

Ks = cluster_sizes(res.log, N, times)
print(f"{'t':>5} {'<K>':>9} {'rate':>7} {'Maxwell <K>(t/tau)':>19} {'g(0)':>7}")
for t, row in zip(times, Ks):
    h = histogram(row, t)
    print(f"{t:>5} {row.mean():>9.2f} {rate_statistic(row.mean(), t):>7.3f} "
          f"{maxwell_mean_K(t / tau):>19.2f} {float(h.fraction(0)):>7.3f}")

# the largest cluster at the end already covers a good share of the box
print("largest K at t=2:", Ks[-1].max(), "of", N - 1)
print("median K at t=2:", int(np.median(Ks[-1])))
