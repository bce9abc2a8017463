"""Backward clusters reconstructed from a pair-collision log, and their statistics.

The backward cluster of particle i at time t is built by walking the log
backwards from t: a particle joins at its latest collision with a current
member, after which its own earlier collisions count too. Equivalently,
j belongs to the cluster of i exactly when a chain of collisions with
increasing times leads from j to i before t.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .engine import CollisionLog


@dataclass(frozen=True)
class BackwardCluster:
    tagged: int
    members: frozenset

    @property
    def cardinality(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class ClusterHistogram:
    """Exact cluster-size counts; ``weights[K] = counts[K] / n``."""

    n: int
    counts: dict
    t: Optional[float] = None

    @property
    def weights(self) -> dict:
        return {k: c / self.n for k, c in self.counts.items()}

    def fraction(self, k: int) -> Fraction:
        return Fraction(self.counts.get(k, 0), self.n)


@dataclass(frozen=True)
class ClusterStats:
    t: float
    mean_K: float
    K0: float
    K2: float
    rate: float
    tau_hat: Optional[float] = None
    stderr: Optional[float] = None


def _check_time(log: CollisionLog, t: float):
    if not t >= 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    return log.cutoff(t)


def backward_cluster(log: CollisionLog, i: int, t: float, n: Optional[int] = None) -> BackwardCluster:
    """Backward cluster of particle ``i`` using records with t_m < t."""
    cut = _check_time(log, t)
    if n is None:
        n = int(max(log.p.max(initial=-1), log.q.max(initial=-1), i)) + 1
    if not 0 <= i < n:
        raise IndexError(f"particle index {i} out of range for N={n}")
    inside = {i}
    for r in range(cut - 1, -1, -1):
        p, q = int(log.p[r]), int(log.q[r])
        if (p in inside) != (q in inside):
            inside.add(q if p in inside else p)
    inside.discard(i)
    return BackwardCluster(i, frozenset(inside))


def _check_n(log: CollisionLog, n: int):
    if n < 1:
        raise ValueError("N must be positive")
    if log.m_c and max(int(log.p.max()), int(log.q.max())) >= n:
        raise IndexError("log refers to particles beyond N")


def all_clusters(log: CollisionLog, n: int, t: float, method: str = "bitset") -> np.ndarray:
    """Cluster cardinalities K_i(t) for every particle, as an int array of length N.

    ``method="sweep"`` runs one backward sweep per particle, O(N m_c);
    the default forward bitset propagation costs O(m_c N / 64).
    """
    return cluster_sizes(log, n, [t], method=method)[0]


def cluster_sizes(log: CollisionLog, n: int, times: Sequence[float],
                  method: str = "bitset", chunk_words: int = 256) -> np.ndarray:
    """K_i(t) for each time in ``times``; returns shape (len(times), N).

    A single pass over the log serves all times.
    """
    _check_n(log, n)
    times = [float(t) for t in times]
    cuts = np.array([_check_time(log, t) for t in times], dtype=np.int64)
    if method == "sweep":
        return np.array([_kernels.sweep_all(log.p, log.q, int(c), n) for c in cuts]).reshape(len(times), n)
    if method != "bitset":
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(cuts, kind="stable")
    out = np.empty((len(times), n), dtype=np.int64)
    if len(times):
        out[order] = _kernels.forward_reach(log.p, log.q, cuts[order], n, int(chunk_words))
    return out


def histogram(Ks, t: Optional[float] = None) -> ClusterHistogram:
    Ks = np.asarray(Ks, dtype=np.int64).reshape(-1)
    if Ks.size == 0:
        raise ValueError("histogram of an empty list")
    vals, cnt = np.unique(Ks, return_counts=True)
    return ClusterHistogram(int(Ks.size), {int(k): int(c) for k, c in zip(vals, cnt)}, t)


def mean_cardinality(h: ClusterHistogram) -> float:
    return sum(k * c for k, c in h.counts.items()) / h.n


def cluster_moments(Ks, velocities) -> tuple:
    """Empirical (K0, K2): means of K_i and of K_i |v_i|^2 over particles."""
    Ks = np.asarray(Ks, dtype=float).reshape(-1)
    v = np.asarray(velocities, dtype=float).reshape(-1, 3)
    if Ks.shape[0] != v.shape[0]:
        raise ValueError(f"{Ks.shape[0]} cluster sizes but {v.shape[0]} velocities")
    speed2 = np.einsum("ij,ij->i", v, v)
    return float(Ks.mean()), float((Ks * speed2).mean())


def rate_statistic(mean_K: float, t: float) -> float:
    """(1/t) log(<K>_t + 1)."""
    if not t > 0:
        raise ValueError(f"rate statistic needs t > 0, got {t}")
    if mean_K < 0:
        raise ValueError("mean cluster size must be nonnegative")
    return math.log1p(mean_K) / t


class NoCollisionsError(ValueError):
    pass


def mean_free_time_estimate(n: int, t: float, m_c: int) -> float:
    """Free time per particle, N t / (2 m_c)."""
    if not t > 0:
        raise ValueError("t must be positive")
    if m_c <= 0:
        raise NoCollisionsError("no pair collisions observed; mean free time undefined")
    return n * t / (2 * m_c)


def cluster_stats(log: CollisionLog, n: int, t: float, velocities=None) -> ClusterStats:
    """All single-run statistics at time ``t``."""
    Ks = all_clusters(log, n, t)
    mean_K = float(Ks.mean())
    K0, K2 = (mean_K, math.nan) if velocities is None else cluster_moments(Ks, velocities)
    m = log.cutoff(t)
    tau = mean_free_time_estimate(n, t, m) if (t > 0 and m > 0) else None
    rate = rate_statistic(mean_K, t) if t > 0 else math.nan
    return ClusterStats(t, mean_K, K0, K2, rate, tau)


def write_histogram_csv(path, hists: Sequence[ClusterHistogram]):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "K", "g"])
        for h in hists:
            for k in sorted(h.counts):
                w.writerow([repr(h.t), k, repr(h.counts[k] / h.n)])


def write_stats_csv(path, stats: Sequence[ClusterStats]):
    cols = ["t", "meanK", "K0", "K2", "rate", "tau_hat", "stderr"]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for s in stats:
            w.writerow([repr(float(x)) if x is not None else "" for x in
                        (s.t, s.mean_K, s.K0, s.K2, s.rate, s.tau_hat, s.stderr)])


def read_stats_csv(path) -> list:
    def num(x):
        return float(x) if x != "" else None

    with Path(path).open(newline="") as fh:
        return [ClusterStats(float(r["t"]), float(r["meanK"]), float(r["K0"]), float(r["K2"]),
                             float(r["rate"]), num(r["tau_hat"]), num(r["stderr"]))
                for r in csv.DictReader(fh)]
