"""Command line entry point.

Exit status is 0 on success, 1 when the request is invalid and 2 when a
simulation or file operation fails.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import harness
from .engine import SimulationError
from .harness import ExperimentError, ExperimentSpec
from .initial import rng_stream
from .kinetics import maxwell_mean_K, yule_sample_many

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _pairs(text):
    # "1802:72,10125:13"
    out = {}
    for item in text.split(","):
        try:
            n, m = item.split(":")
            out[int(n)] = int(m)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected N:M pairs, got {item!r}")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hsclusters", description="Backward collision clusters in hard-sphere gases.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run ensembles and write cluster statistics")
    s.add_argument("--config", type=Path, help="JSON file with ExperimentSpec fields")
    s.add_argument("--case", help="1, 2, 3 or maxwell-beta=<beta>")
    s.add_argument("--n", type=_ints, help="particle numbers, comma separated")
    s.add_argument("--ensembles", type=_ints, help="runs per N, one value or one per N")
    s.add_argument("--t-end", type=float)
    s.add_argument("--sample-times", type=_floats)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", type=str)
    s.add_argument("--log-collisions", action="store_true", default=None)
    s.add_argument("--moments", action="store_true", default=None)
    s.add_argument("--cells", action=argparse.BooleanOptionalAction, default=None)
    s.add_argument("--zero-momentum", action="store_true", default=None)
    s.add_argument("--workers", type=int)

    t = sub.add_parser("table1", help="rate statistic on the published (t, N) grid")
    t.add_argument("--cases", type=lambda x: [c.strip() for c in x.split(",")], default=["1", "2", "3"])
    t.add_argument("--n-tiers", type=_ints, default=[1802])
    t.add_argument("--ensembles", type=_pairs, help="override M per N, e.g. 1802:20")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", type=str)
    t.add_argument("--cells", action=argparse.BooleanOptionalAction, default=None)
    t.add_argument("--workers", type=int)

    f = sub.add_parser("fig2", help="Cases 1 and 2 at times below one mean free time")
    f.add_argument("--n", type=int, default=1802)
    f.add_argument("--ensembles", type=int, default=720)
    f.add_argument("--t-grid", type=_floats, default=[0.025, 0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2])
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", type=str)
    f.add_argument("--workers", type=int)

    m = sub.add_parser("maxwell-check", help="Yule sampler against the exact Maxwell-model law")
    m.add_argument("--t", type=_floats, default=[0.5, 1.0, 2.0])
    m.add_argument("--samples", type=int, default=100_000)
    m.add_argument("--seed", type=int, default=0)
    return p


def _spec_from_args(a) -> ExperimentSpec:
    d = {}
    if a.config is not None:
        try:
            d = json.loads(a.config.read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config {a.config}: {exc}")
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {a.config} is not valid JSON: {exc}")
        if not isinstance(d, dict):
            raise UsageError(f"config {a.config} must hold a JSON object")
    if a.case is not None:
        d["case"] = a.case
    if a.n is not None:
        ms = a.ensembles if a.ensembles is not None else [1]
        if len(ms) == 1:
            ms = ms * len(a.n)
        if len(ms) != len(a.n):
            raise UsageError("--ensembles needs one value or one per --n")
        d["runs"] = [[n, m] for n, m in zip(a.n, ms)]
    elif a.ensembles is not None:
        if "runs" not in d or len(a.ensembles) not in (1, len(d["runs"])):
            raise UsageError("--ensembles needs --n or a config with matching runs")
        ms = a.ensembles * len(d["runs"]) if len(a.ensembles) == 1 else a.ensembles
        d["runs"] = [[r[0], m] for r, m in zip(d["runs"], ms)]
    if a.t_end is not None:
        d["t_end"] = a.t_end
    if a.sample_times is not None:
        d["sample_times"] = a.sample_times
    if a.seed is not None:
        d["master_seed"] = a.seed
    if a.out is not None:
        d["out_dir"] = a.out
    for key in ("log_collisions", "moments", "cells", "zero_momentum"):
        if getattr(a, key) is not None:
            d[key] = getattr(a, key)
    if "sample_times" not in d and "t_end" in d:
        d["sample_times"] = [d["t_end"]]
    missing = [k for k in ("case", "runs", "t_end") if k not in d]
    if missing:
        raise UsageError(f"missing required settings: {', '.join(missing)}")
    try:
        return ExperimentSpec.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc))


def _print_result(result, out=None):
    out = out or sys.stdout
    print(f"{'N':>7} {'M':>4} {'t':>7} {'<K>':>12} {'stderr':>10} {'rate':>8} {'tau_hat':>8}", file=out)
    for r in result.rows:
        print(f"{r.n:>7} {r.m:>4} {r.t:>7.4g} {r.mean_K:>12.4f} {r.stderr:>10.4f} "
              f"{r.rate:>8.4f} {r.tau_hat:>8.4f}", file=out)


def cmd_simulate(a):
    spec = _spec_from_args(a)
    result = harness.run_experiment(spec, workers=a.workers)
    _print_result(result)
    if spec.out_dir:
        print(f"wrote {spec.out_dir}")


def cmd_table1(a):
    for c in a.cases:
        harness.VelocityDistribution.parse(c)
    ens = dict(harness.DEFAULT_ENSEMBLES)
    ens.update(a.ensembles or {})
    for n in a.n_tiers:
        if n not in ens:
            raise UsageError(f"no ensemble size for N={n}; add --ensembles {n}:M")
    res = harness.reproduce_table1(a.cases, a.n_tiers, ensembles=a.ensembles, master_seed=a.seed,
                                   cells=a.cells, workers=a.workers, out_dir=a.out)
    print(res.format())


def cmd_fig2(a):
    out = harness.small_time_comparison(a.n, a.ensembles, a.t_grid, master_seed=a.seed,
                                        workers=a.workers)
    rows = []
    for t in sorted(a.t_grid):
        r1, r2 = out["1"].row(a.n, t), out["2"].row(a.n, t)
        rows.append((t, r1.rate, r1.rate_stderr, r2.rate, r2.rate_stderr))
    print(f"{'t':>7} {'rate1':>8} {'se1':>7} {'rate2':>8} {'se2':>7}")
    for row in rows:
        print(f"{row[0]:>7.4g} {row[1]:>8.4f} {row[2]:>7.4f} {row[3]:>8.4f} {row[4]:>7.4f}")
    if a.out:
        path = Path(a.out)
        try:
            path.mkdir(parents=True, exist_ok=True)
            with (path / "fig2.csv").open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "rate_case1", "stderr_case1", "rate_case2", "stderr_case2"])
                w.writerows([[repr(float(x)) for x in row] for row in rows])
        except OSError as exc:
            raise OSError(f"cannot write results to {path}: {exc}") from exc


def cmd_maxwell_check(a):
    if a.samples < 2:
        raise UsageError("--samples must be at least 2")
    if any(t < 0 for t in a.t):
        raise UsageError("--t values must be nonnegative")
    print(f"{'t':>6} {'mean K':>10} {'e^t-1':>10} {'z':>7} {'P(K=0)':>9} {'e^-t':>9} {'z':>7}")
    for j, t in enumerate(a.t):
        ks = yule_sample_many(t, a.samples, rng_stream(a.seed, j))
        mean, se = ks.mean(), ks.std(ddof=1) / math.sqrt(a.samples)
        p0 = float(np.mean(ks == 0))
        p_exact = math.exp(-t)
        se0 = math.sqrt(p_exact * (1 - p_exact) / a.samples)
        z1 = (mean - maxwell_mean_K(t)) / se if se > 0 else 0.0
        z0 = (p0 - p_exact) / se0 if se0 > 0 else 0.0
        print(f"{t:>6.3g} {mean:>10.4f} {maxwell_mean_K(t):>10.4f} {z1:>7.2f} "
              f"{p0:>9.5f} {p_exact:>9.5f} {z0:>7.2f}")


COMMANDS = {"simulate": cmd_simulate, "table1": cmd_table1, "fig2": cmd_fig2,
            "maxwell-check": cmd_maxwell_check}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        COMMANDS[a.command](a)
    except UsageError as exc:
        print(f"hsclusters: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ExperimentError, SimulationError, OSError, ArithmeticError) as exc:
        print(f"hsclusters: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"hsclusters: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
