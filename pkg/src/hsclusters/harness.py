"""Ensemble experiments: many seeded runs, cluster statistics, aggregation, files.

Every run draws its positions and velocities from its own random stream,
keyed by (master seed, velocity law, N, run index). Results therefore do
not depend on execution order or on the number of workers.
"""
from __future__ import annotations

import csv
import json
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import clusters
from .engine import SimConfig, run
from .initial import VelocityDistribution, make_initial_condition, rng_stream
from .kinetics import equilibrium_mean_free_time

# (N, M) ladder used for the published ensemble averages
DEFAULT_ENSEMBLES = {
    1802: 72, 2402: 54, 3203: 40, 4271: 30, 5695: 23, 7593: 17, 10125: 13,
    13500: 10, 18000: 8, 24000: 6, 32000: 4, 42666: 3, 56888: 3, 75851: 2, 101135: 2,
}

TABLE1_TIMES = (0.4, 0.8, 1.2, 1.6, 2.0)

# published (1/t) log(<K>_t + 1), keyed by (case, N), one value per TABLE1_TIMES entry
PUBLISHED_RATES = {
    ("1", 1802): (4.288, 4.227, 4.090, 3.840, 3.462),
    ("1", 10125): (4.201, 4.221, 4.199, 4.116, 3.916),
    ("1", 101135): (4.199, 4.223, 4.233, 4.230, 4.191),
    ("2", 1802): (4.290, 4.222, 4.088, 3.841, 3.467),
    ("2", 10125): (4.244, 4.253, 4.216, 4.118, 3.925),
    ("2", 101135): (4.190, 4.211, 4.223, 4.218, 4.180),
    ("3", 1802): (8.576, 8.455, 8.180, 7.680, 6.924),
    ("3", 10125): (8.403, 8.442, 8.399, 8.233, 7.833),
    ("3", 101135): (8.399, 8.446, 8.467, 8.461, 8.382),
}

# above this size the cell-list search is used unless told otherwise
AUTO_CELLS_N = 1000


class ExperimentError(RuntimeError):
    """A run failed; the message names the run."""


@dataclass
class ExperimentSpec:
    """What to simulate and where to put it.

    ``case`` is ``"1"``, ``"2"``, ``"3"`` or ``"maxwell-beta=<beta>"``.
    ``runs`` lists (N, M) pairs. ``cells=None`` picks the neighbour search
    by size. ``velocity_scale`` multiplies every initial velocity after
    sampling (used for pathwise rescaling checks).
    """

    case: str
    runs: list
    t_end: float
    sample_times: list
    master_seed: int = 0
    out_dir: Optional[str] = None
    log_collisions: bool = False
    moments: bool = False
    cells: Optional[bool] = None
    velocity_scale: float = 1.0
    zero_momentum: bool = False

    def __post_init__(self):
        self.case = str(self.case)
        self.runs = [(int(n), int(m)) for n, m in self.runs]
        self.sample_times = [float(t) for t in self.sample_times]
        self.validate()

    def validate(self):
        self.distribution  # raises on unknown case
        if not self.runs:
            raise ValueError("no (N, M) pairs requested")
        for n, m in self.runs:
            if n < 2 or m < 1:
                raise ValueError(f"invalid (N, M) = ({n}, {m})")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not self.sample_times:
            raise ValueError("sample_times is empty")
        ts = self.sample_times
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample_times must be strictly increasing")
        if not (ts[0] > 0 and ts[-1] <= self.t_end):
            raise ValueError(f"sample_times must lie in (0, t_end={self.t_end}]")
        if not self.velocity_scale > 0:
            raise ValueError("velocity_scale must be positive")

    @property
    def distribution(self) -> VelocityDistribution:
        return VelocityDistribution.parse(self.case)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["runs"] = [list(r) for r in self.runs]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown spec fields: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class RunResult:
    """Per-run summary; arrays are indexed by sample time."""

    n: int
    index: int
    mean_K: np.ndarray
    m_c: np.ndarray
    K0: np.ndarray
    K2: np.ndarray
    hist_counts: list
    m_c_total: int
    energy: float
    log: Optional[object] = None


@dataclass
class TierStats:
    """Ensemble statistics for one (N, t)."""

    n: int
    m: int
    t: float
    mean_K: float
    stderr: float
    rate: float
    rate_stderr: float
    mean_of_rates: float
    tau_hat: float
    K0: float
    K2: float
    hist_counts: dict = field(repr=False, default_factory=dict)


@dataclass
class EnsembleResult:
    spec: ExperimentSpec
    rows: list
    runs: dict
    tau_hat_total: dict

    def row(self, n: int, t: float) -> TierStats:
        for r in self.rows:
            if r.n == n and math.isclose(r.t, t, rel_tol=0, abs_tol=1e-12):
                return r
        raise KeyError((n, t))

    def tier(self, n: int) -> list:
        return [r for r in self.rows if r.n == n]


def _case_key(label: str) -> int:
    return zlib.crc32(label.encode())


def _use_cells(spec: ExperimentSpec, n: int) -> bool:
    return spec.cells if spec.cells is not None else n >= AUTO_CELLS_N


def simulate_run(spec: ExperimentSpec, n: int, k: int) -> RunResult:
    """Run number ``k`` of the N-particle ensemble in ``spec``."""
    dist = spec.distribution
    rng = rng_stream(spec.master_seed, _case_key(dist.label), n, k)
    ic = make_initial_condition(n, dist, rng, zero_momentum=spec.zero_momentum)
    if spec.velocity_scale != 1.0:
        ic = ic.scaled(spec.velocity_scale)
    cfg = SimConfig(n_particles=n, t_end=spec.t_end, sample_times=spec.sample_times,
                    seed=spec.master_seed, cells=_use_cells(spec, n))
    res = run(cfg, ic)
    Ks = clusters.cluster_sizes(res.log, n, spec.sample_times)
    mean_K = Ks.mean(axis=1)
    K0 = mean_K.copy()
    K2 = np.full(len(spec.sample_times), math.nan)
    if spec.moments:
        for s in range(len(spec.sample_times)):
            K0[s], K2[s] = clusters.cluster_moments(Ks[s], res.velocities[s])
    m_c = np.array([res.log.cutoff(t) for t in spec.sample_times], dtype=np.int64)
    hists = [np.bincount(row) for row in Ks]
    return RunResult(n, k, mean_K, m_c, K0, K2, hists, res.m_c, ic.realized_energy,
                     res.log if spec.log_collisions else None)


def _run_job(args):
    spec, n, k = args
    try:
        return simulate_run(spec, n, k)
    except Exception as exc:
        raise ExperimentError(f"run {k} of N={n} failed: {exc}") from exc


def aggregate(spec: ExperimentSpec, runs: dict) -> EnsembleResult:
    rows = []
    tau_total = {}
    for n, m in spec.runs:
        rr = runs[n]
        mk = np.array([r.mean_K for r in rr])  # (M, S)
        mc = np.array([r.m_c for r in rr])
        for s, t in enumerate(spec.sample_times):
            col = mk[:, s]
            mean = float(col.mean())
            se = float(col.std(ddof=1) / math.sqrt(m)) if m > 1 else math.nan
            pooled = int(mc[:, s].sum())
            counts: dict = {}
            for r in rr:
                for K, c in enumerate(r.hist_counts[s]):
                    if c:
                        counts[K] = counts.get(K, 0) + int(c)
            rows.append(TierStats(
                n=n, m=m, t=t, mean_K=mean, stderr=se,
                rate=clusters.rate_statistic(mean, t),
                rate_stderr=se / ((1.0 + mean) * t),
                mean_of_rates=float(np.mean([clusters.rate_statistic(x, t) for x in col])),
                tau_hat=n * t * m / (2 * pooled) if pooled else math.nan,
                K0=float(np.mean([r.K0[s] for r in rr])),
                K2=float(np.mean([r.K2[s] for r in rr])),
                hist_counts=counts,
            ))
        total = sum(r.m_c_total for r in rr)
        tau_total[n] = n * spec.t_end * m / (2 * total) if total else math.nan
    return EnsembleResult(spec, rows, runs, tau_total)


def run_experiment(spec: ExperimentSpec, workers: Optional[int] = None) -> EnsembleResult:
    """Run every (N, M) ensemble in ``spec`` and aggregate.

    ``workers`` defaults to the number of available CPUs. Any failed run
    aborts the experiment with :class:`ExperimentError`.
    """
    spec.validate()
    jobs = [(spec, n, k) for n, m in spec.runs for k in range(m)]
    if workers is None:
        workers = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    runs: dict = {}
    for r in results:
        runs.setdefault(r.n, []).append(r)
    for rr in runs.values():
        rr.sort(key=lambda r: r.index)
    result = aggregate(spec, runs)
    if spec.out_dir:
        emit(result, spec.out_dir)
    return result


def growth_rate(times, mean_K, t_lo: float, t_hi: float) -> float:
    """Least-squares slope of log(<K>_t + 1) against t over [t_lo, t_hi]."""
    t = np.asarray(times, dtype=float)
    y = np.log1p(np.asarray(mean_K, dtype=float))
    sel = (t >= t_lo - 1e-12) & (t <= t_hi + 1e-12)
    if sel.sum() < 2:
        raise ValueError("window needs at least two sample times")
    return float(np.polyfit(t[sel], y[sel], 1)[0])


@dataclass
class Table1Result:
    results: dict  # (case, N) -> EnsembleResult
    times: tuple

    def rates(self, case: str, n: int) -> list:
        res = self.results[(case, n)]
        return [res.row(n, t).rate for t in self.times]

    def stderrs(self, case: str, n: int) -> list:
        res = self.results[(case, n)]
        return [res.row(n, t).rate_stderr for t in self.times]

    def format(self) -> str:
        keys = sorted(self.results)
        body = []
        for s, t in enumerate(self.times):
            cells = []
            for c, n in keys:
                r = self.results[(c, n)].row(n, t)
                ref = PUBLISHED_RATES.get((c, n))
                ref_txt = f" [{ref[TABLE1_TIMES.index(t)]:.3f}]" if ref and t in TABLE1_TIMES else ""
                cells.append(f"{r.rate:.3f}±{r.rate_stderr:.3f}{ref_txt}")
            body.append((t, cells))
        heads = [f"case {c} N={n}" for c, n in keys]
        width = max(len(x) for x in heads + [c for _, cs in body for c in cs])
        lines = ["t    " + "".join(f"| {h:<{width}} " for h in heads)]
        lines.append("-" * len(lines[0]))
        for t, cells in body:
            lines.append(f"{t:<5}" + "".join(f"| {c:<{width}} " for c in cells))
        return "\n".join(lines)


def reproduce_table1(cases: Sequence[str] = ("1", "2", "3"), n_values: Sequence[int] = (1802,),
                     ensembles: Optional[dict] = None, master_seed: int = 0,
                     times: Sequence[float] = TABLE1_TIMES, cells: Optional[bool] = None,
                     workers: Optional[int] = None, out_dir: Optional[str] = None) -> Table1Result:
    """Rate statistic on the published (t, N) grid, with standard errors.

    ``ensembles`` maps N to M and defaults to :data:`DEFAULT_ENSEMBLES`.
    """
    ens = dict(DEFAULT_ENSEMBLES)
    if ensembles:
        ens.update(ensembles)
    results = {}
    for case in cases:
        for n in n_values:
            if n not in ens:
                raise ValueError(f"no ensemble size known for N={n}; pass ensembles={{N: M}}")
            sub = None if out_dir is None else str(Path(out_dir) / f"case{case}_N{n}")
            spec = ExperimentSpec(case=case, runs=[(n, ens[n])], t_end=max(times),
                                  sample_times=list(times), master_seed=master_seed,
                                  cells=cells, out_dir=sub)
            results[(str(case), n)] = run_experiment(spec, workers=workers)
    return Table1Result(results, tuple(times))


def small_time_comparison(n: int = 1802, m: int = 720,
                          t_grid: Sequence[float] = (0.025, 0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2),
                          master_seed: int = 0, cells: Optional[bool] = None,
                          workers: Optional[int] = None) -> dict:
    """Cases 1 and 2 at times shorter than one mean free time; returns case -> EnsembleResult."""
    tau = equilibrium_mean_free_time(0.5)
    t_grid = sorted(float(t) for t in t_grid)
    if not t_grid or t_grid[0] <= 0 or t_grid[-1] > tau:
        raise ValueError(f"t_grid must lie in (0, {tau:.4f}]")
    out = {}
    for case in ("1", "2"):
        spec = ExperimentSpec(case=case, runs=[(n, m)], t_end=t_grid[-1], sample_times=t_grid,
                              master_seed=master_seed, cells=cells)
        out[case] = run_experiment(spec, workers=workers)
    return out


STATS_COLUMNS = ["case", "N", "M", "t", "meanK", "stderr", "rate", "K0", "K2", "tau_hat"]


def _f(x) -> str:
    return repr(float(x))


def emit(result: EnsembleResult, out_dir) -> dict:
    """Write stats, histogram and per-run CSVs plus a JSON summary into ``out_dir``.

    Returns a mapping from artefact name to path.
    """
    out = Path(out_dir)
    spec = result.spec
    case = spec.case
    paths = {}
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths["stats"] = out / "stats.csv"
        with paths["stats"].open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(STATS_COLUMNS)
            for r in result.rows:
                w.writerow([case, r.n, r.m, _f(r.t), _f(r.mean_K), _f(r.stderr), _f(r.rate),
                            _f(r.K0), _f(r.K2), _f(r.tau_hat)])
        paths["histogram"] = out / "histogram.csv"
        with paths["histogram"].open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["case", "N", "t", "K", "g"])
            for r in result.rows:
                total = sum(r.hist_counts.values())
                for K in sorted(r.hist_counts):
                    w.writerow([case, r.n, _f(r.t), K, _f(r.hist_counts[K] / total)])
        paths["runs"] = out / "runs.csv"
        with paths["runs"].open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["case", "N", "run", "t", "meanK", "m_c", "K0", "K2"])
            for n, _ in spec.runs:
                for rr in result.runs[n]:
                    for s, t in enumerate(spec.sample_times):
                        w.writerow([case, n, rr.index, _f(t), _f(rr.mean_K[s]), int(rr.m_c[s]),
                                    _f(rr.K0[s]), _f(rr.K2[s])])
        if spec.log_collisions:
            logdir = out / "logs"
            logdir.mkdir(exist_ok=True)
            for n, _ in spec.runs:
                for rr in result.runs[n]:
                    stem = logdir / f"N{n}_run{rr.index}"
                    rr.log.write_csv(stem.with_suffix(".csv"))
                    rr.log.write_binary(stem.with_suffix(".bin"))
        paths["summary"] = out / "summary.json"
        summary = {
            "spec": spec.to_dict(),
            "master_seed": spec.master_seed,
            "tau_hat_total": {str(n): v for n, v in result.tau_hat_total.items()},
            "rows": [{"N": r.n, "M": r.m, "t": r.t, "meanK": r.mean_K, "stderr": r.stderr,
                      "rate": r.rate, "rate_stderr": r.rate_stderr,
                      "mean_of_rates": r.mean_of_rates, "tau_hat": r.tau_hat}
                     for r in result.rows],
        }
        paths["summary"].write_text(json.dumps(summary, indent=2, allow_nan=True))
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return paths


def read_stats(path) -> list:
    """Rows of a stats CSV written by :func:`emit`, with numeric fields parsed."""
    rows = []
    with Path(path).open(newline="") as fh:
        for r in csv.DictReader(fh):
            rows.append({"case": r["case"], "N": int(r["N"]), "M": int(r["M"]),
                         **{k: float(r[k]) for k in STATS_COLUMNS[3:]}})
    return rows


def rerun_from_summary(path, workers: Optional[int] = None) -> EnsembleResult:
    """Repeat the experiment recorded in a summary.json (without writing files)."""
    data = json.loads(Path(path).read_text())
    d = dict(data["spec"])
    d["out_dir"] = None
    return run_experiment(ExperimentSpec.from_dict(d), workers=workers)
