"""Initial conditions: non-overlapping uniform positions and velocity draws."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .engine import ParticleState, kinetic_energy


def rng_stream(master_seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the stream addressed by ``(master_seed, *keys)``.

    Streams with different keys are statistically independent, and the
    stream for a key does not depend on which other streams were created.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class VelocityDistribution:
    """One-particle velocity law.

    Use the constructors :meth:`case1`, :meth:`case2`, :meth:`case3`,
    :meth:`maxwell` and :meth:`custom`. ``energy`` is the nominal
    E = integral of |v|^2/2 f0(v) dv.
    """

    kind: str
    beta: Optional[float] = None
    sampler: Optional[Callable] = None
    nominal_energy: Optional[float] = None

    @classmethod
    def case1(cls):
        return cls("case1", beta=3.0)

    @classmethod
    def case2(cls):
        return cls("case2")

    @classmethod
    def case3(cls):
        return cls("case3", beta=0.75)

    @classmethod
    def maxwell(cls, beta: float):
        if not beta > 0:
            raise ValueError("beta must be positive")
        return cls("maxwell", beta=float(beta))

    @classmethod
    def custom(cls, sampler: Callable, energy: float):
        """``sampler(rng, n)`` must return an (n, 3) array."""
        return cls("custom", sampler=sampler, nominal_energy=float(energy))

    @classmethod
    def parse(cls, text) -> "VelocityDistribution":
        """Accepts ``1``, ``2``, ``3`` (or ``case1`` ...) and ``maxwell-beta=<beta>``."""
        s = str(text).strip().lower()
        if s.startswith("case"):
            s = s[4:]
        if s in ("1", "2", "3"):
            return {"1": cls.case1, "2": cls.case2, "3": cls.case3}[s]()
        if s.startswith("maxwell-beta="):
            return cls.maxwell(float(s.split("=", 1)[1]))
        raise ValueError(f"unknown velocity distribution {text!r}")

    @property
    def label(self) -> str:
        if self.kind == "maxwell":
            return f"maxwell-beta={self.beta!r}"
        return self.kind

    @property
    def energy(self) -> float:
        if self.kind == "case2":
            return 0.5
        if self.kind == "custom":
            return self.nominal_energy
        return 1.5 / self.beta

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return sample_velocities(self, n, rng)


@dataclass
class InitialCondition:
    positions: np.ndarray
    velocities: np.ndarray

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def realized_energy(self) -> float:
        return kinetic_energy(self.velocities) / self.n

    @property
    def states(self):
        return [ParticleState(x, v) for x, v in zip(self.positions, self.velocities)]

    def scaled(self, c: float) -> "InitialCondition":
        """Same positions, velocities multiplied by ``c``."""
        return InitialCondition(self.positions.copy(), self.velocities * c)

    def write_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z", "vx", "vy", "vz"])
            for x, v in zip(self.positions, self.velocities):
                w.writerow([repr(float(a)) for a in (*x, *v)])

    @classmethod
    def read_csv(cls, path):
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        data = np.array([[float(r[k]) for k in ("x", "y", "z", "vx", "vy", "vz")] for r in rows])
        data = data.reshape(-1, 6)
        return cls(data[:, :3].copy(), data[:, 3:].copy())


def sample_positions(n: int, epsilon: float, box_side: float, rng: np.random.Generator,
                     max_attempts: Optional[int] = None) -> np.ndarray:
    """Uniform sphere centres with pairwise distance >= epsilon.

    Centres are kept at least epsilon/2 away from every wall. Candidates are
    drawn one at a time and rejected on overlap; a bucket grid with cells of
    side >= epsilon limits each overlap test to 27 buckets.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not (0 < epsilon < box_side):
        raise ValueError(f"epsilon={epsilon} must lie in (0, box_side={box_side})")
    fill = n * (math.pi / 6) * epsilon ** 3 / box_side ** 3
    if fill >= 0.3:
        raise ValueError(f"packing fraction {fill:.3f} too high for rejection sampling")
    if max_attempts is None:
        max_attempts = 1000 * n

    lo, hi = epsilon / 2, box_side - epsilon / 2
    nb = max(1, min(int(box_side / epsilon), 4096))
    h = box_side / nb
    eps2 = epsilon * epsilon
    buckets: dict = {}
    out = np.empty((n, 3))
    placed = 0
    attempts = 0
    batch = max(64, n)
    while placed < n:
        cand = rng.uniform(lo, hi, size=(batch, 3))
        for x in cand:
            attempts += 1
            if attempts > max_attempts:
                raise RuntimeError(
                    f"placed only {placed} of {n} spheres after {max_attempts} attempts; "
                    "lower the density")
            c = (min(int(x[0] / h), nb - 1), min(int(x[1] / h), nb - 1), min(int(x[2] / h), nb - 1))
            ok = True
            for a in (c[0] - 1, c[0], c[0] + 1):
                for b in (c[1] - 1, c[1], c[1] + 1):
                    for d in (c[2] - 1, c[2], c[2] + 1):
                        for k in buckets.get((a, b, d), ()):
                            y = out[k]
                            if (x[0] - y[0]) ** 2 + (x[1] - y[1]) ** 2 + (x[2] - y[2]) ** 2 < eps2:
                                ok = False
                                break
                        if not ok:
                            break
                    if not ok:
                        break
                if not ok:
                    break
            if ok:
                out[placed] = x
                buckets.setdefault(c, []).append(placed)
                placed += 1
                if placed == n:
                    break
    return out


def sample_velocities(dist: VelocityDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. velocity draws; no rescaling of energy or momentum."""
    if n < 1:
        raise ValueError("n must be positive")
    if dist.kind == "case2":
        return rng.uniform(-1.0, 1.0, size=(n, 3))
    if dist.kind == "custom":
        v = np.asarray(dist.sampler(rng, n), dtype=float)
        if v.shape != (n, 3):
            raise ValueError(f"custom sampler returned shape {v.shape}, expected {(n, 3)}")
        return v
    return rng.normal(0.0, math.sqrt(1.0 / dist.beta), size=(n, 3))


def make_initial_condition(n: int, dist: VelocityDistribution, rng: np.random.Generator,
                           epsilon: Optional[float] = None, box_side: float = 1.0,
                           zero_momentum: bool = False) -> InitialCondition:
    """Positions then velocities from ``rng``; ``epsilon`` defaults to n**-0.5."""
    if epsilon is None:
        epsilon = n ** -0.5
    pos = sample_positions(n, epsilon, box_side, rng)
    vel = sample_velocities(dist, n, rng)
    if zero_momentum:
        vel = vel - vel.mean(axis=0)
    return InitialCondition(pos, vel)
