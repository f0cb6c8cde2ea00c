"""Command-line interface.

Subcommands::

    run       one model layer -> trajectory CSV (+ features JSON)
    compare   several layers on a shared grid -> wide CSV + divergence report
    sweep     maximum conversion efficiency versus pump photon number
    selftest  invariant checks on small instances
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from itertools import combinations
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analysis import efficiency_sweep, extract_features, pump_amplitude_minimum, run_model
from .config import METHODS, SimConfig, load_config, parse_complex
from .errors import ConfigError, DownconversionError, IntegrationError
from .observables import CSV_COLUMNS, CSV_FORMAT_VERSION, Trajectory

log = logging.getLogger("downconversion")


def fmt(x) -> str:
    """17 significant digits; ``None``/NaN become empty fields."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return format(x, ".17g")


def trajectory_csv(traj: Trajectory, raw_time_scale: Optional[float] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = list(CSV_COLUMNS)
    if raw_time_scale is not None:
        header[0] = "t_raw"
    w.writerow(header)
    for row in traj.csv_rows():
        row = list(row)
        if raw_time_scale is not None:
            row[0] = row[0] / raw_time_scale
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _write(text: str, path: Optional[str]):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if math.isnan(obj) else float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def features_document(traj: Trajectory, config: SimConfig) -> dict:
    feats = extract_features(traj, config.n2_0)
    diagnostics = {
        k: v for k, v in traj.meta.items() if isinstance(v, (int, float, str)) and k not in ("method",)
    }
    return _jsonable(
        {
            "features": feats.to_dict(),
            "diagnostics": diagnostics,
            "config": config.to_dict(),
            "tool": {"name": "downconversion", "version": __version__, "csv_format": CSV_FORMAT_VERSION},
        }
    )


# ---------------------------------------------------------------------------
# configuration assembly


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML/JSON configuration file")
    p.add_argument("--n2", type=float, help="mean pump photon number n2_0")
    p.add_argument("--tmax", type=float, help="end of the scaled time grid")
    p.add_argument("--points", type=int, help="number of output times")
    p.add_argument("--seed-alpha1", help="sub-harmonic seed amplitude (e.g. 1e-6 or 0.1+0.2j)")
    p.add_argument("--threads", type=int, help="worker threads for sector propagation and sweeps")
    p.add_argument("--raw-time", action="store_true", help="write raw time t instead of scaled time")
    p.add_argument("--out", help="output CSV path (default stdout)")


def build_config(args, method: Optional[str] = None) -> SimConfig:
    data = {}
    if args.config:
        data = load_config(args.config).to_dict()
    overrides = {
        "method": method or getattr(args, "method", None),
        "n2_0": args.n2,
        "t_max_scaled": args.tmax,
        "n_points": args.points,
        "threads": args.threads,
    }
    if args.seed_alpha1 is not None:
        try:
            overrides["seed_alpha1"] = _dump(parse_complex(args.seed_alpha1))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), key="seed_alpha1") from None
    data.update({k: v for k, v in overrides.items() if v is not None})
    return SimConfig.from_dict(data)


def _dump(z: complex):
    return [z.real, z.imag]


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    config = build_config(args)
    traj = run_model(config)
    _write(trajectory_csv(traj, config.time_scale if args.raw_time else None), args.out)
    doc = features_document(traj, config)
    if args.features_out:
        Path(args.features_out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def divergence_report(trajs: dict, n2_0: float, times) -> dict:
    """Pairwise ``<n1>`` divergence and pump-amplitude comparisons."""
    pairs = {}
    for a, b in combinations(trajs, 2):
        n1a, n1b = trajs[a]["n1"], trajs[b]["n1"]
        scale = np.maximum(np.maximum(np.abs(n1a), np.abs(n1b)), 1e-300)
        rel = np.where((n1a == 0) & (n1b == 0), 0.0, np.abs(n1a - n1b) / scale)
        entry = {"max_rel_n1_divergence": float(rel.max())}
        for pct in (5, 50):
            over = np.nonzero(rel > pct / 100)[0]
            entry[f"first_time_over_{pct}pct"] = float(times[over[0]]) if len(over) else None
        if n2_0 > 0:
            d = np.abs(trajs[a]["a2"] - trajs[b]["a2"]) / math.sqrt(n2_0)
            over = np.nonzero(d > 0.05)[0]
            entry["first_time_pump_amplitude_differs_5pct"] = float(times[over[0]]) if len(over) else None
        pairs[f"{a}|{b}"] = entry
    amp_min = {}
    if n2_0 > 0:
        for name, tr in trajs.items():
            amp_min[name] = pump_amplitude_minimum(tr).time
    return {"pairs": pairs, "t_of_pump_amplitude_min": amp_min}


def compare_methods(config: SimConfig, methods: Sequence[str]):
    """Run each method on ``config``'s grid; returns (trajectories, failures)."""
    trajs, failures = {}, {}
    for m in methods:
        key = m
        i = 2
        while key in trajs or key in failures:
            key = f"{m}#{i}"
            i += 1
        try:
            trajs[key] = run_model(config.replace(method=m))
        except DownconversionError as exc:
            log.error("method %s failed: %s", m, exc)
            failures[key] = f"{type(exc).__name__}: {exc}"
    return trajs, failures


def compare_csv(trajs: dict, times, raw_time_scale: Optional[float] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = CSV_COLUMNS[1:]
    w.writerow(["t_raw" if raw_time_scale else "t_scaled"] + [f"{m}:{c}" for m in trajs for c in cols])
    rows = {m: list(tr.csv_rows()) for m, tr in trajs.items()}
    for i, t in enumerate(times):
        out = [fmt(t / raw_time_scale if raw_time_scale else t)]
        for m in trajs:
            out.extend(fmt(v) for v in rows[m][i][1:])
        w.writerow(out)
    return buf.getvalue()


def cmd_compare(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}", key="methods")
    config = build_config(args, method=methods[0])
    trajs, failures = compare_methods(config, methods)
    if not trajs:
        raise DownconversionError("every method failed: " + "; ".join(failures.values()))
    times = next(iter(trajs.values())).times
    _write(compare_csv(trajs, times, config.time_scale if args.raw_time else None), args.out)
    report = divergence_report(trajs, config.n2_0, times)
    report["failures"] = failures
    report["config"] = config.to_dict()
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    if args.report_out:
        Path(args.report_out).write_text(text)
    else:
        sys.stderr.write(text)
    return 0


def cmd_sweep(args) -> int:
    try:
        n2_list = [float(x) for x in args.n2_list.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(str(exc), key="n2-list") from None
    if not n2_list:
        raise ConfigError("list must be non-empty", key="n2-list")
    template = build_config(args)
    rows = efficiency_sweep(n2_list, template, threads=template.threads)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n2_0", "max_efficiency", "t_of_max", "runtime_s", "error"])
    for r in rows:
        w.writerow([fmt(r.n2_0), fmt(r.efficiency), fmt(r.t_of_max), format(r.runtime_s, ".3f"), r.error or ""])
    _write(buf.getvalue(), args.out)
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest()
    failed = 0
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
        failed += not ok
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="downconversion", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one model layer")
    _add_common(r)
    r.add_argument("--method", choices=METHODS)
    r.add_argument("--features-out", help="features JSON path")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="compare model layers on one grid")
    _add_common(c)
    c.add_argument("--methods", required=True, help="comma-separated methods, e.g. meanfield,exact")
    c.add_argument("--report-out", help="divergence report JSON path (default stderr)")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", help="efficiency versus n2_0")
    _add_common(s)
    s.add_argument("--method", choices=METHODS)
    s.add_argument("--n2-list", required=True, help="comma-separated n2_0 values")
    s.set_defaults(func=cmd_sweep)

    t = sub.add_parser("selftest", help="invariant checks on small instances")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        status = args.func(args)
    except ConfigError as exc:
        print(f"error: configuration: {exc}", file=sys.stderr)
        return 2
    except IntegrationError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return 3
    except DownconversionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    log.info("%s finished in %.2f s", args.command, time.perf_counter() - t0)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
