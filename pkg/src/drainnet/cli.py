"""Command-line entry point: ``drainnet <subcommand> [options]``.

Every run prints one record (JSON by default, or a CSV table) that embeds
the full configuration, so identical arguments give byte-identical output.
Exit codes: 0 success, 2 invalid arguments, 3 budget exceeded, 4 simulation
or I/O failure.  Errors are reported as a one-line JSON record on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analytic, clt, coalescence, coupling, forest
from .errors import BudgetExceeded, DegenerateSample
from .step_law import ModelParams, StepLaw, moment

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_INTERNAL = 0, 2, 3, 4
SCHEMA_VERSION = 1


@dataclass
class Result:
    """What a subcommand produces: a full record, a summary table and plot series."""

    record: dict
    table: list = field(default_factory=list)
    plots: dict = field(default_factory=dict)  # name -> (header, rows)
    summary: str = ""


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------- subcommands


def cmd_step_law(a) -> Result:
    params = ModelParams(a.dim, a.p)
    law = StepLaw.build(params)
    orders = _ints(a.moments)
    if any(o < 0 for o in orders):
        raise ValueError("moment orders must be nonnegative")
    moments = {f"m_{o}": moment(params, o) for o in orders}
    rows = [{"k": k, "shell_size": int(s), "probability": float(q)}
            for k, (s, q) in enumerate(zip(law.shell_sizes, law.shell_prob))]
    rec = {"k_max": law.k_max, "tail_mass": law.tail_mass, "total_probability": float(law.shell_prob.sum()),
           "moments": moments, "shells": rows}
    plots = {"shell_probabilities": (("k", "probability"), [(r["k"], r["probability"]) for r in rows])}
    return Result(rec, rows, plots, f"step law d={a.dim} p={a.p}: k_max={law.k_max}")


def cmd_degree_law(a) -> Result:
    law = analytic.degree_pmf(a.p, a.cap)
    exact, recomputed = analytic.expected_degree(a.p, a.cap)
    offsets = [{"offset": l, "l1_length": l + 1, "q": analytic.offset_parameter(a.p, l),
                "unscaled_q": analytic.unscaled_offset_parameter(a.p, l)} for l in range(1, a.max_offset + 1)]
    rows = [{"degree": k, "probability": float(q)} for k, q in enumerate(law.pmf)]
    rec = {"mean": exact, "pmf_mean": recomputed, "residual": law.residual, "pmf": rows,
           "offsets": offsets, "up_degree_total": analytic.up_degree_conservation(a.p)}
    plots = {"degree_pmf": (("degree", "probability"), [(r["degree"], r["probability"]) for r in rows])}
    return Result(rec, rows, plots, f"degree law p={a.p}: mean={exact}")


def cmd_forest(a) -> Result:
    params = ModelParams(a.dim, a.p)
    if a.n < 1:
        raise ValueError("n must be >= 1")
    w = forest.simulate_window(params, a.n, a.seed)
    rec = w.summary()
    rec["S_n"] = forest.degree_count(w, a.nu)
    rec["L_n"] = forest.edge_length_count(w, a.l)
    if a.depth is not None:
        rec["trees"] = forest.tree_count(w, a.depth)
    hist = w.degree_histogram()
    total = hist.sum()
    rows = [{"degree": k, "count": int(c), "frequency": float(c / total) if total else 0.0}
            for k, c in enumerate(hist) if k >= 1]
    plots = {"degree_histogram": (("degree", "frequency"), [(r["degree"], r["frequency"]) for r in rows])}
    return Result(rec, rows, plots, f"forest d={a.dim} n={a.n}: {w.open_count} open vertices")


def _vector(text: str, m: int) -> np.ndarray:
    vals = _ints(text)
    if len(vals) == 1:
        vals = vals + [0] * (m - 1)
    if len(vals) != m:
        raise ValueError(f"separation needs 1 or {m} components")
    return np.array(vals, dtype=np.int64)


def cmd_coalesce(a) -> Result:
    params = ModelParams(a.dim, a.p)
    sep = _vector(a.sep, params.m)
    if a.horizon < 1 or a.replicas < 1:
        raise ValueError("horizon and replicas must be >= 1")
    est = coalescence.meeting_probability(params, sep, a.horizon, a.replicas, a.seed)
    marks = sorted({h for h in (1, 10, 100, 1000, 10_000, 100_000, 1_000_000) if h < a.horizon} | {a.horizon})
    rows = [{"horizon": h, "meeting_fraction": est.fraction_by(h)} for h in marks]
    rec = {"meeting_fraction": est.fraction, "se": est.se, "curve": rows,
           "met": int((est.meeting_times >= 0).sum())}
    if a.checkpoints:
        mc = coalescence.martingale_check(params, int(sep[0]), _ints(a.checkpoints), a.replicas, a.seed)
        rec["martingale"] = {"checkpoints": mc.checkpoints, "means": mc.means, "ses": mc.ses,
                             "negative_replicas": mc.negative_replicas}
    plots = {"meeting_curve": (("horizon", "meeting_fraction"), [(r["horizon"], r["meeting_fraction"]) for r in rows])}
    return Result(rec, rows, plots, f"coalesce d={a.dim}: meeting fraction {est.fraction:.4f} by {a.horizon}")


def cmd_couple(a) -> Result:
    params = ModelParams(a.dim, a.p)
    if a.mode == "bound":
        rows = []
        for s in _ints(a.seps):
            e = coupling.decoupling_probability(params, s, a.replicas, a.seed)
            rows.append({"separation": s, "estimate": e.estimate, "se": e.se, "bound": e.bound,
                         "corrected_bound": e.corrected_bound, "violations": e.violations,
                         "within_bound": e.estimate <= e.bound + 3 * e.se})
        plots = {"decoupling": (("separation", "estimate", "bound"),
                                [(r["separation"], r["estimate"], r["bound"]) for r in rows])}
        return Result({"cells": rows}, rows, plots, f"coupling bound over {len(rows)} separations")
    if a.mode == "event":
        start = None if a.sep is None else _vector(a.sep, params.m)
        rows = []
        for n in _ints(a.n):
            e = coupling.event_probability(params, n, a.epsilon, a.event, a.replicas, a.seed, start, a.K)
            rows.append({"n": n, "event": e.event, "K": e.K, "start": list(e.start), "estimate": e.estimate, "se": e.se})
        plots = {f"event_{a.event}": (("n", "estimate"), [(r["n"], r["estimate"]) for r in rows])}
        return Result({"rows": rows}, rows, plots, f"event {a.event} over n={a.n}")
    rows = []
    for n in _ints(a.n):
        e = coupling.multi_path_escape(params, a.k, n, a.epsilon, a.replicas, a.seed)
        rows.append({"n": n, "k": a.k, "starts": e.starts.tolist(), "estimate": e.estimate, "se": e.se})
    plots = {"escape": (("n", "estimate"), [(r["n"], r["estimate"]) for r in rows])}
    return Result({"rows": rows}, rows, plots, f"escape k={a.k} over n={a.n}")


def cmd_ancestors(a) -> Result:
    params = ModelParams(a.dim, a.p)
    census = forest.ancestor_census(params, a.t, _ints(a.orders), a.half_width, a.seed)
    rows = [{"order": n, "count": c, "density": dens}
            for n, c, dens in zip(census.orders, census.counts, census.densities)]
    rec = {"sites": census.sites, "exact": census.exact, "census": rows}
    if a.branching is not None:
        b = forest.branching_stats(params, a.branching, a.half_width, a.seed)
        rec["branching"] = {"order": b.order, "r0": b.r0, "r1": b.r1, "r0_branching": b.r0_branching,
                            "inequality_holds": b.inequality_holds}
    plots = {"ancestor_density": (("order", "density"), [(r["order"], r["density"]) for r in rows])}
    return Result(rec, rows, plots, f"ancestors d={a.dim}: counts {list(census.counts)}")


def cmd_clt(a) -> Result:
    params = ModelParams(a.dim, a.p)
    sample = clt.run_replicas(params, a.n, a.kind, a.replicas, a.seed, a.index)
    report = clt.normality_report(sample, clt.Thresholds(a.max_skew, a.max_kurtosis, a.max_ks))
    rec = report.to_dict()
    if a.max_lag is not None:
        s2 = clt.estimate_s2(params, a.n, a.index, a.max_lag, a.replicas, a.seed)
        rec["s2"] = {"terms": s2.terms, "total": s2.total, "se": s2.total_se, "max_lag": s2.max_lag}
    rows = [{"replica": i, "value": int(v), "standardized": float(z)}
            for i, (v, z) in enumerate(zip(sample.values, report.standardized))]
    plots = {"standardized": (("standardized",), [(float(z),) for z in report.standardized])}
    return Result(rec, rows, plots, f"clt {a.kind} n={a.n}: passed={report.passed}")


# ------------------------------------------------------------------- plumbing


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="drainnet", description="Drainage-network experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--out", type=Path, help="write the record here instead of stdout")
        sp.add_argument("--plotdata", type=Path, help="directory for columnar plot files")
        sp.add_argument("--seed", type=int, default=0)
        return sp

    sp = add("step-law", cmd_step_law, "exact step law and moments")
    sp.add_argument("--dim", type=int, default=3)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--moments", default="0,2,4")

    sp = add("degree-law", cmd_degree_law, "exact degree and edge-offset laws (d = 2)")
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--cap", type=int, default=32)
    sp.add_argument("--max-offset", type=int, default=5)

    sp = add("forest", cmd_forest, "census of one window")
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--n", type=int, default=64)
    sp.add_argument("--nu", type=int, default=1)
    sp.add_argument("--l", type=int, default=1)
    sp.add_argument("--depth", type=int, help="count trees after tracing this many levels down")

    sp = add("coalesce", cmd_coalesce, "meeting of two drainage paths")
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--sep", default="3")
    sp.add_argument("--horizon", type=int, default=1000)
    sp.add_argument("--replicas", type=int, default=100)
    sp.add_argument("--checkpoints", default="", help="martingale checkpoints (d = 2)")

    sp = add("couple", cmd_couple, "coupling with independent walks")
    sp.add_argument("--dim", type=int, default=4)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--mode", choices=("bound", "event", "escape"), default="bound")
    sp.add_argument("--seps", default="2,3,4,5,6,7,8")
    sp.add_argument("--sep", default=None, help="event start separation")
    sp.add_argument("--n", default="2,4")
    sp.add_argument("--epsilon", type=float, default=0.25)
    sp.add_argument("--event", choices=("B", "E", "F", "G"), default="E")
    sp.add_argument("--K", type=float, default=None)
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--replicas", type=int, default=1000)

    sp = add("ancestors", cmd_ancestors, "ancestor census and branching points")
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--t", type=int, default=0)
    sp.add_argument("--orders", default="0,8,32,128")
    sp.add_argument("--half-width", type=int, default=256)
    sp.add_argument("--branching", type=int, default=None)

    sp = add("clt", cmd_clt, "replica counts and normality diagnostics")
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--n", type=int, default=64)
    sp.add_argument("--kind", choices=clt.KINDS, default="degree")
    sp.add_argument("--index", type=int, default=1, help="nu for degree counts, l for edge lengths")
    sp.add_argument("--replicas", type=int, default=500)
    sp.add_argument("--max-lag", type=int, default=None)
    sp.add_argument("--max-skew", type=float, default=0.15)
    sp.add_argument("--max-kurtosis", type=float, default=0.3)
    sp.add_argument("--max-ks", type=float, default=0.05)
    return ap


def _config(args) -> dict:
    skip = {"func", "out", "plotdata", "format"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg["format"] = args.format
    cfg["schema_version"] = SCHEMA_VERSION
    return cfg


def config_argv(config: dict) -> list[str]:
    """Command line that reproduces a run from its embedded config."""
    argv = [config["command"]]
    for key, value in sorted(config.items()):
        if key in ("command", "schema_version") or value is None:
            continue
        argv += ["--" + key.replace("_", "-"), str(value)]
    return argv


def render(config: dict, result: Result, fmt: str) -> str:
    if fmt == "json":
        doc = {"config": config, "result": result.record}
        return json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(_jsonable(config), sort_keys=True) + "\n")
    if result.table:
        w = csv.DictWriter(buf, fieldnames=list(result.table[0]), lineterminator="\n")
        w.writeheader()
        for row in result.table:
            w.writerow({k: json.dumps(_jsonable(v)) if isinstance(v, (list, dict)) else _jsonable(v)
                        for k, v in row.items()})
    return buf.getvalue()


def emit_plotdata(result: Result, path: Path) -> list[Path]:
    """Write each plot series as whitespace-separated columns under ``path``.

    Multi-column files start with a ``#`` header line; single-column files
    hold one value per line.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (header, rows) in sorted(result.plots.items()):
        target = path / f"{name}.dat"
        lines = [" ".join(repr(_jsonable(v)) for v in r) for r in rows]
        if len(header) > 1:
            lines.insert(0, "# " + " ".join(header))
        target.write_text("\n".join(lines) + "\n")
        written.append(target)
    return written


def _fail(code: int, exc: BaseException) -> int:
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)
    return code


def run(argv=None) -> int:
    args = _parser().parse_args(argv)
    config = _config(args)
    try:
        result = args.func(args)
    except BudgetExceeded as exc:
        return _fail(EXIT_BUDGET, exc)
    except (ValueError, DegenerateSample) as exc:
        return _fail(EXIT_INVALID, exc)
    except Exception as exc:  # simulation failures (search exhaustion and the like)
        return _fail(EXIT_INTERNAL, exc)
    text = render(config, result, args.format)
    try:
        if args.out is not None:
            args.out.write_text(text)
        else:
            sys.stdout.write(text)
        if args.plotdata is not None:
            emit_plotdata(result, args.plotdata)
    except OSError as exc:
        return _fail(EXIT_INTERNAL, exc)
    print(result.summary, file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
