"""Maxwell molecules: cluster size is geometric with mean exp(t) - 1.

A cluster of size j grows at rate j, which is a Yule process started from
one individual. Sampling it reproduces the exact law.
"""
import numpy as np

from hsclusters import maxwell_fn_mass, maxwell_mean_K, rate_statistic, rng_stream, yule_sample_many

rng = rng_stream(0)
for t in (0.5, 1.0, 2.0):
    ks = yule_sample_many(t, 100_000, rng)
    print(f"t={t}: sample mean {ks.mean():.4f}  exact {maxwell_mean_K(t):.4f}  "
          f"rate statistic {rate_statistic(maxwell_mean_K(t), t):.12f}")
    counts = np.bincount(ks, minlength=6)[:6] / ks.size
    exact = [maxwell_fn_mass(n, t) for n in range(6)]
    print("   P(K=n), n<6 sampled:", np.round(counts, 4))
    print("                 exact:", np.round(exact, 4))
