"""Event-driven dynamics of elastic hard spheres in a box with specular walls.

The engine advances exactly from event to event (pair collisions, wall
bounces and, with cell lists enabled, cell crossings) and records every
pair collision in a :class:`CollisionLog`. Wall bounces are resolved but
not logged.

Walls are flat and specular. With ``wall_contact="surface"`` (the default)
a sphere bounces when its surface touches a wall, so centres stay in
[eps/2, L - eps/2]; with ``"center"`` the centre itself reflects at 0 and L.

Impact directions follow the incoming-configuration convention: for a
record ``(t, p, q, omega)`` with ``p < q``, ``omega`` is the unit vector
from the centre of ``p`` to the centre of ``q`` at contact, so that
``omega . (v_p - v_q) >= 0`` before the collision.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import _kernels


class SimulationError(RuntimeError):
    """Fatal inconsistency detected while running the event loop."""


class OverlapError(SimulationError):
    """Two spheres interpenetrate beyond the configured tolerance."""


class Face(enum.IntEnum):
    """Box faces, ordered for tie-breaking: axis x<y<z, negative before positive."""

    NEG_X = 0
    POS_X = 1
    NEG_Y = 2
    POS_Y = 3
    NEG_Z = 4
    POS_Z = 5

    @property
    def axis(self) -> int:
        return self.value // 2


class EventKind(enum.IntEnum):
    WALL = _kernels.WALL
    CELL = _kernels.CELL
    PAIR = _kernels.PAIR


class Event(NamedTuple):
    """Layout of a scheduled event, as stored in the heap.

    Tuples compare lexicographically, which gives the tie-break
    (time, kind, owner index, partner). ``partner`` is the other particle for
    pair events and a face or cell-face code otherwise; ``stamps`` are the
    owner's event counter and the partner's velocity counter at prediction.
    """

    time: float
    kind: EventKind
    owner: int
    partner: int
    owner_stamp: int
    partner_stamp: int


@dataclass
class ParticleState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(3)


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one run.

    ``epsilon`` defaults to ``n_particles ** -0.5`` (N eps^2 = 1).
    ``wall_contact`` is ``"surface"`` or ``"center"`` (see module docstring).
    ``cells`` switches on the cell-list neighbour search; ``cell_size``
    overrides its automatic choice. ``check_overlaps`` makes the engine
    measure the closest approach of every event participant to its
    neighbours, reported as :attr:`SimulationResult.min_gap_ratio`.
    """

    n_particles: int
    t_end: float
    epsilon: Optional[float] = None
    box_side: float = 1.0
    sample_times: Sequence[float] = ()
    seed: int = 0
    overlap_tolerance: float = 1e-9
    grazing_threshold: float = 1e-14
    cells: bool = False
    cell_size: Optional[float] = None
    check_overlaps: bool = False
    wall_contact: str = "surface"

    def __post_init__(self):
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", float(self.n_particles) ** -0.5)
        object.__setattr__(self, "sample_times", tuple(float(t) for t in self.sample_times))
        if self.n_particles < 2:
            raise ValueError(f"need at least 2 particles, got {self.n_particles}")
        if not self.box_side > 0:
            raise ValueError("box_side must be positive")
        if not 0 < self.epsilon < self.box_side / 2:
            raise ValueError(
                f"epsilon={self.epsilon} must lie in (0, box_side/2={self.box_side / 2})")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        ts = self.sample_times
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample_times must be sorted")
        if ts and not (ts[0] > 0 and ts[-1] <= self.t_end):
            raise ValueError("sample_times must lie in (0, t_end]")
        if self.overlap_tolerance < 0 or self.grazing_threshold < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.wall_contact not in ("surface", "center"):
            raise ValueError(f"wall_contact must be 'surface' or 'center', not {self.wall_contact!r}")

    @property
    def wall_offset(self) -> float:
        """Distance from each face to the plane where centres reflect."""
        return self.epsilon / 2 if self.wall_contact == "surface" else 0.0

    def n_cells(self) -> int:
        """Cells per box side for the cell-list search (1 when disabled)."""
        if not self.cells:
            return 1
        if self.cell_size is not None:
            if self.cell_size < self.epsilon:
                raise ValueError("cell_size must be at least epsilon")
            size = self.cell_size
        else:
            # roughly two particles per cell, never below one diameter
            size = max(self.epsilon, (2.0 * self.box_side ** 3 / self.n_particles) ** (1 / 3))
        return max(1, int(math.floor(self.box_side / size)))


class CollisionRecord(NamedTuple):
    t: float
    p: int
    q: int
    omega: np.ndarray


_BINARY_DTYPE = np.dtype([("t", "<f8"), ("p", "<u4"), ("q", "<u4"), ("omega", "<f8", (3,))])


class CollisionLog:
    """Time-ordered pair-collision records backed by numpy arrays."""

    def __init__(self, t, p, q, omega=None):
        self.t = np.ascontiguousarray(t, dtype=float).reshape(-1)
        self.p = np.ascontiguousarray(p, dtype=np.int64).reshape(-1)
        self.q = np.ascontiguousarray(q, dtype=np.int64).reshape(-1)
        m = self.t.shape[0]
        if omega is None:
            omega = np.full((m, 3), np.nan)
        self.omega = np.ascontiguousarray(omega, dtype=float).reshape(m, 3)
        if not (self.p.shape[0] == self.q.shape[0] == m):
            raise ValueError("t, p, q must have equal lengths")
        if np.any(self.p == self.q):
            raise ValueError("a record pairs a particle with itself")
        if np.any(np.diff(self.t) < 0):
            raise ValueError("collision times must be nondecreasing")

    @classmethod
    def from_records(cls, records):
        """Build from ``(t, p, q)`` or ``(t, p, q, omega)`` tuples."""
        records = list(records)
        t = [r[0] for r in records]
        p = [r[1] for r in records]
        q = [r[2] for r in records]
        omega = None
        if records and len(records[0]) > 3:
            omega = [r[3] for r in records]
        return cls(t, p, q, omega)

    @property
    def m_c(self) -> int:
        return self.t.shape[0]

    def __len__(self):
        return self.m_c

    def __getitem__(self, k) -> CollisionRecord:
        return CollisionRecord(float(self.t[k]), int(self.p[k]), int(self.q[k]), self.omega[k].copy())

    def __iter__(self):
        for k in range(self.m_c):
            yield self[k]

    def __eq__(self, other):
        if not isinstance(other, CollisionLog):
            return NotImplemented
        return (np.array_equal(self.t, other.t) and np.array_equal(self.p, other.p)
                and np.array_equal(self.q, other.q)
                and np.array_equal(self.omega, other.omega, equal_nan=True))

    def cutoff(self, t: float) -> int:
        """Number of records with t_m < t."""
        return int(np.searchsorted(self.t, t, side="left"))

    def write_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "p", "q", "wx", "wy", "wz"])
            for k in range(self.m_c):
                w.writerow([repr(float(self.t[k])), int(self.p[k]), int(self.q[k]),
                            *(repr(float(x)) for x in self.omega[k])])

    @classmethod
    def read_csv(cls, path):
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            return cls([], [], [], np.empty((0, 3)))
        return cls([float(r["t"]) for r in rows], [int(r["p"]) for r in rows],
                   [int(r["q"]) for r in rows],
                   [[float(r["wx"]), float(r["wy"]), float(r["wz"])] for r in rows])

    def to_bytes(self) -> bytes:
        rec = np.empty(self.m_c, dtype=_BINARY_DTYPE)
        rec["t"] = self.t
        rec["p"] = self.p
        rec["q"] = self.q
        rec["omega"] = self.omega
        return rec.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes):
        if len(data) % _BINARY_DTYPE.itemsize:
            raise ValueError("binary log length is not a whole number of records")
        rec = np.frombuffer(data, dtype=_BINARY_DTYPE)
        return cls(rec["t"], rec["p"].astype(np.int64), rec["q"].astype(np.int64), rec["omega"])

    def write_binary(self, path):
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read_binary(cls, path):
        return cls.from_bytes(Path(path).read_bytes())


@dataclass
class SimulationResult:
    """Outcome of :func:`run`.

    ``positions`` and ``velocities`` have shape (n_samples, N, 3) and hold
    the state at each of ``sample_times``. ``energy_trace`` is the total
    kinetic energy (unit mass) at those times. ``approach_speed[m]`` is
    ``omega_m . (v_p - v_q)`` just before collision m.
    """

    config: SimConfig
    sample_times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    log: CollisionLog
    energy_trace: np.ndarray
    initial_energy: float
    n_wall_events: int
    n_cell_events: int
    n_stale_events: int
    min_gap_ratio: float
    approach_speed: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def m_c(self) -> int:
        return self.log.m_c


def _vec(x, name):
    a = np.asarray(x, dtype=float).reshape(-1)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be three finite numbers")
    return a


def predict_pair_collision(a: ParticleState, b: ParticleState, epsilon: float,
                           overlap_tolerance: float = 1e-9,
                           grazing_threshold: float = 1e-14) -> Optional[float]:
    """Time from now until spheres ``a`` and ``b`` touch, or None.

    Raises
    ------
    OverlapError
        If the spheres already overlap by more than ``overlap_tolerance``.
    """
    dx = _vec(a.position, "position") - _vec(b.position, "position")
    dv = _vec(a.velocity, "velocity") - _vec(b.velocity, "velocity")
    dist = math.sqrt(float(dx @ dx))
    if dist < epsilon * (1 - overlap_tolerance):
        raise OverlapError(f"spheres overlap: distance {dist} < epsilon {epsilon}")
    s = _kernels.pair_time(dx[0], dx[1], dx[2], dv[0], dv[1], dv[2],
                           epsilon * epsilon, grazing_threshold)
    return None if math.isinf(s) else s


def predict_wall_collision(a: ParticleState, box_side: float, offset: float = 0.0):
    """Earliest wall bounce as ``(time, Face)``; ``(inf, None)`` for a particle at rest.

    The centre reflects at ``offset`` and ``box_side - offset`` on each axis;
    pass ``offset=epsilon/2`` for spheres bouncing on their surface.
    """
    s, face = _kernels.wall_time(_vec(a.position, "position"), _vec(a.velocity, "velocity"),
                                 float(offset), float(box_side - offset))
    if face < 0:
        return math.inf, None
    return s, Face(face)


def resolve_pair_collision(v, v1, omega):
    """Post-collision velocities for an elastic pair exchange along ``omega``."""
    v = _vec(v, "v")
    v1 = _vec(v1, "v1")
    omega = _vec(omega, "omega")
    if abs(float(omega @ omega) - 1.0) > 1e-9:
        raise ValueError(f"omega must be a unit vector, |omega|^2 = {omega @ omega}")
    k = omega @ (v - v1)
    return v - omega * k, v1 + omega * k


def resolve_wall_collision(v, face) -> np.ndarray:
    """Flip the velocity component normal to ``face``."""
    out = _vec(v, "v").copy()
    out[Face(face).axis] *= -1
    return out


def _as_arrays(initial):
    if hasattr(initial, "positions") and hasattr(initial, "velocities"):
        pos, vel = initial.positions, initial.velocities
    elif isinstance(initial, tuple) and len(initial) == 2 and not isinstance(initial[0], ParticleState):
        pos, vel = initial
    else:
        states = list(initial)
        pos = [s.position for s in states]
        vel = [s.velocity for s in states]
    pos = np.array(pos, dtype=float).reshape(-1, 3)
    vel = np.array(vel, dtype=float).reshape(-1, 3)
    if pos.shape != vel.shape:
        raise ValueError("positions and velocities differ in shape")
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
        raise ValueError("initial state contains non-finite values")
    return pos, vel


def kinetic_energy(velocities) -> float:
    v = np.asarray(velocities, dtype=float)
    return 0.5 * float(np.einsum("ij,ij->", v, v))


def run(config: SimConfig, initial) -> SimulationResult:
    """Evolve ``initial`` under ``config`` and collect the pair-collision log.

    ``initial`` may be an :class:`~hsclusters.initial.InitialCondition`,
    a sequence of :class:`ParticleState`, or a ``(positions, velocities)``
    pair of (N, 3) arrays. The run is a pure function of its inputs.
    """
    pos, vel = _as_arrays(initial)
    n = pos.shape[0]
    if n != config.n_particles:
        raise ValueError(f"config expects {config.n_particles} particles, got {n}")
    L = config.box_side
    off = config.wall_offset
    if np.any(pos < off) or np.any(pos > L - off):
        raise ValueError(f"initial centres must lie in [{off}, {L - off}]")
    ncell = config.n_cells()
    use_cells = config.cells and ncell >= 3
    sample_times = np.asarray(config.sample_times, dtype=float)

    (status, diag, lt, lp, lq, lw, la, sx, sv, counters, min_gap) = _kernels.simulate(
        pos, vel, float(config.epsilon), float(L), float(off), float(config.t_end), sample_times,
        float(config.grazing_threshold), float(config.overlap_tolerance),
        use_cells, ncell if use_cells else 1, bool(config.check_overlaps))

    if status == _kernels.OVERLAP_ERROR:
        t, i, j, g = diag
        who = f"particles {int(i)} and {int(j)}" if j >= 0 else f"particle {int(i)} and a neighbour"
        raise OverlapError(f"overlap at t={t!r}: {who} at distance {g!r} * epsilon")
    if status == _kernels.SCHEDULER_ERROR:
        t, i, j, now = diag
        raise SimulationError(
            f"event for particle {int(i)} at t={t!r} popped after clock {now!r}")

    energy = np.array([kinetic_energy(v) for v in sv])
    return SimulationResult(
        config=config,
        sample_times=sample_times,
        positions=sx,
        velocities=sv,
        log=CollisionLog(lt, lp, lq, lw),
        energy_trace=energy,
        initial_energy=kinetic_energy(vel),
        n_wall_events=int(counters[1]),
        n_cell_events=int(counters[2]),
        n_stale_events=int(counters[3]),
        min_gap_ratio=float(min_gap),
        approach_speed=la,
    )
