"""Reference results from kinetic theory.

Maxwellian molecules with unit total collision rate: a cluster of size j
grows at rate j, so the cardinality at time t is geometric,
P(K = n) = e^{-t} (1 - e^{-t})^n, with mean e^t - 1. For hard spheres we
provide the equilibrium collision rate and mean free time, and the
temperature rescaling of cluster growth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

YULE_POPULATION_CAP = 10 ** 9


@dataclass(frozen=True)
class EquilibriumParams:
    """Maxwellian with inverse temperature ``beta`` (per-component variance 1/beta)."""

    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @classmethod
    def from_energy(cls, energy: float):
        return cls(1.5 / energy)

    @property
    def energy(self) -> float:
        return 1.5 / self.beta


def maxwell_fn_mass(n: int, t: float) -> float:
    """Probability that the cluster holds exactly ``n`` particles at time ``t``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if n == 0:
        return math.exp(-t)
    return math.exp(-t) * (-math.expm1(-t)) ** n


def maxwell_mean_K(t: float) -> float:
    if t < 0:
        raise ValueError("t must be nonnegative")
    return math.expm1(t)


def yule_sample_K(t: float, rng: np.random.Generator) -> int:
    """Cluster size at time ``t`` from one simulated pure-birth path."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    size = 1
    clock = rng.exponential(1.0)
    while clock < t:
        size += 1
        if size > YULE_POPULATION_CAP:
            raise OverflowError(f"population exceeded {YULE_POPULATION_CAP}")
        clock += rng.exponential(1.0 / size)
    return size - 1


def yule_sample_many(t: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent draws of :func:`yule_sample_K`, advanced in lockstep."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    pop = np.ones(size, dtype=np.int64)
    clock = rng.exponential(1.0, size)
    alive = clock < t
    while alive.any():
        idx = np.flatnonzero(alive)
        pop[idx] += 1
        if pop[idx].max() > YULE_POPULATION_CAP:
            raise OverflowError(f"population exceeded {YULE_POPULATION_CAP}")
        clock[idx] += rng.exponential(1.0, idx.size) / pop[idx]
        alive[idx] = clock[idx] < t
    return pop - 1


def equilibrium_mean_free_time(energy: float, n_eps2: float = 1.0) -> float:
    """Hard-sphere mean free time at equilibrium, [4 (2 pi E / 3)^{1/2} N eps^2]^{-1}."""
    if not (energy > 0 and n_eps2 > 0):
        raise ValueError("energy and N eps^2 must be positive")
    return 1.0 / (4.0 * math.sqrt(2.0 * math.pi * energy / 3.0) * n_eps2)


def _mean_relative_speed(speed: float, sigma: float) -> float:
    """E|v - V| for |v| = speed and V ~ N(0, sigma^2 I), by radial quadrature.

    u = |V - v| has the noncentral chi density with three degrees of freedom.
    """
    a = speed
    if a < 1e-8 * sigma:
        def density(u):
            return math.sqrt(2 / math.pi) * u * u / sigma ** 3 * math.exp(-u * u / (2 * sigma ** 2))
        lo, hi, pts = 0.0, 40.0 * sigma, None
    else:
        norm = 1.0 / (a * sigma * math.sqrt(2 * math.pi))

        def density(u):
            return norm * u * math.exp(-(u - a) ** 2 / (2 * sigma ** 2)) * -math.expm1(-2 * u * a / sigma ** 2)
        lo, hi = max(0.0, a - 40.0 * sigma), a + 40.0 * sigma
        pts = [a] if lo < a < hi else None
    res = integrate.quad(lambda u: u * density(u), lo, hi, points=pts,
                         epsabs=0.0, epsrel=1e-11, limit=200, full_output=1)
    val, err = res[0], res[1]
    if len(res) > 3 or err > 1e-8 * abs(val):
        raise ArithmeticError(f"quadrature did not converge: estimate {val}, error {err}")
    return val


def collision_rate_maxwellian(v, beta: float) -> float:
    """Hard-sphere collision rate pi * E|v - V| for a particle of velocity ``v``
    in a Maxwellian background with inverse temperature ``beta`` (N eps^2 = 1)."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    speed = float(np.linalg.norm(np.asarray(v, dtype=float)))
    return math.pi * _mean_relative_speed(speed, 1.0 / math.sqrt(beta))


def mean_collision_rate(beta: float) -> float:
    """Equilibrium average of :func:`collision_rate_maxwellian` over velocities."""
    sigma = 1.0 / math.sqrt(beta)

    def integrand(s):
        maxwell_speed = math.sqrt(2 / math.pi) * s * s / sigma ** 3 * math.exp(-s * s / (2 * sigma ** 2))
        return maxwell_speed * math.pi * _mean_relative_speed(s, sigma)

    val, err = integrate.quad(integrand, 0.0, 12.0 * sigma, epsabs=0.0, epsrel=1e-10, limit=200)
    return val


def scaling_map(mean_K_base: Callable[[float], float], c: float) -> Callable[[float], float]:
    """Mean cluster size after rescaling velocities by ``c``: t -> <K>_base(c t).

    For Maxwellians, c = sqrt(beta_base / beta_new); the rate statistic
    scales by ``c`` as well.
    """
    if not c > 0:
        raise ValueError("scale factor must be positive")

    def mapped(t):
        return mean_K_base(c * t)

    return mapped
