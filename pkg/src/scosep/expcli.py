"""Command-line front end: run / sweep / verify / plot.

CSV schema (exactly): experiment,trial,seed,n,d,k,eta,T,metric,value with LF
line endings and '.' decimals; the summary JSON keeps fixed key order.  A
(spec, seed) pair yields byte-identical outputs regardless of worker count.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .errors import ParameterError, ScosepError
from .experiments import (
    EXPERIMENT_IDS,
    PRIMARY_METRIC,
    ExperimentSpec,
    fit_loglog_slope,
    run_experiment,
    summarize,
)
from .svgplot import CSV_HEADER, read_records, render_svg
from .verify import ORACLES, reports_json, reports_table, run_oracles


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records) -> str:
    lines = [",".join(CSV_HEADER)]
    for r in records:
        lines.append(
            ",".join(
                [
                    r.experiment,
                    str(r.trial),
                    str(r.seed),
                    str(r.n),
                    str(r.d),
                    str(r.k),
                    repr(float(r.eta)),
                    str(int(r.T)),
                    r.metric,
                    repr(float(r.value)),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _load_config(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


_INT_KEYS = {"n", "d", "k", "T", "trials", "seed", "workers"}
_FLOAT_KEYS = {"eta"}


def _spec_from_args(args) -> ExperimentSpec:
    values = {}
    if args.config:
        for key, raw in _load_config(args.config).items():
            if key in _INT_KEYS:
                values[key] = int(raw)
            elif key in _FLOAT_KEYS:
                values[key] = float(raw)
            elif key in ("schedule", "loss", "id"):
                values[key] = raw
            else:
                raise ParameterError(f"unknown config key {key!r}")
    for key in ("n", "d", "k", "eta", "T", "trials", "seed", "schedule", "loss", "workers"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    exp_id = values.pop("id", None) or args.experiment
    return ExperimentSpec(id=exp_id, **values)


def _emit_outputs(spec, records, summary, out_base, fig_metric=None, fig_axis="trial"):
    csv_text = records_to_csv(records)
    _write(out_base + ".csv", csv_text)
    _write(out_base + ".json", json.dumps(summary, indent=2, sort_keys=False) + "\n")
    if fig_metric is not None:
        from .figures import render_png

        recs = read_records(out_base + ".csv")
        render_png(recs, fig_metric, out_base + ".png", x_axis=fig_axis)


def cmd_run(args) -> int:
    spec, records = run_experiment(_spec_from_args(args))
    summary = summarize(spec, records)
    out_base = args.out or f"{spec.id}"
    fig_metric = PRIMARY_METRIC[spec.id] if args.fig else None
    _emit_outputs(spec, records, summary, out_base, fig_metric, fig_axis="trial")
    print(json.dumps(summary, indent=2, sort_keys=False))
    return 0


def cmd_sweep(args) -> int:
    if not args.values:
        raise ParameterError("sweep needs at least one value")
    axis = args.axis
    base = _spec_from_args(args)
    all_records = []
    per_value = []
    for raw in args.values:
        value = float(raw) if axis == "eta" else int(raw)
        spec = replace(base, **{axis: value})
        # re-derive dependent defaults for each axis value
        if axis == "n":
            spec = replace(spec, eta=None if args.eta is None else args.eta,
                           T=None if args.T is None else args.T,
                           d=None if args.d is None else args.d)
        spec, records = run_experiment(spec)
        all_records.extend(records)
        metric = PRIMARY_METRIC[spec.id]
        vals = [r.value for r in records if r.metric == metric]
        per_value.append(
            {axis: value, "metric": metric, "mean": sum(vals) / len(vals) if vals else None}
        )
    out_base = args.out or f"{base.id}-sweep"
    csv_text = records_to_csv(all_records)
    _write(out_base + ".csv", csv_text)
    summary = {
        "experiment": base.id,
        "axis": axis,
        "values": [p[axis] for p in per_value],
        "metric": per_value[0]["metric"],
        "means": [p["mean"] for p in per_value],
    }
    means = [p["mean"] for p in per_value]
    try:
        summary["loglog_slope"] = fit_loglog_slope([p[axis] for p in per_value], means)
    except (ParameterError, TypeError):
        summary["loglog_slope"] = None
    _write(out_base + ".json", json.dumps(summary, indent=2, sort_keys=False) + "\n")
    if args.fig:
        from .figures import render_png

        recs = read_records(out_base + ".csv")
        render_png(recs, summary["metric"], out_base + ".png", x_axis=axis,
                   logx=axis in ("n", "T", "eta"), logy=True)
    print(json.dumps(summary, indent=2, sort_keys=False))
    return 0


def cmd_verify(args) -> int:
    ids = args.oracles
    if ids in (["all"], []):
        ids = None
    try:
        reports = run_oracles(ids, seed=args.seed)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"usage: scosep verify [all|{'|'.join(sorted(ORACLES))}] [--seed N]", file=sys.stderr)
        return 2
    print(reports_table(reports))
    if args.out:
        _write(args.out, reports_json(reports) + "\n")
    ok = all(r.verdict in ("PASS", "INCONCLUSIVE") for r in reports)
    return 0 if ok else 1


def cmd_plot(args) -> int:
    records = read_records(args.csv)
    svg = render_svg(records, args.metric, x_axis=args.x, logx=args.logx, logy=args.logy)
    _write(args.out, svg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scosep", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--n", type=int)
        p.add_argument("--d", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--eta", type=float)
        p.add_argument("--T", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--schedule", choices=["PER_PASS", "FIXED"])
        p.add_argument("--loss", choices=["drift", "fa", "nn", "kink", "fc", "composite"])
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--config")
        p.add_argument("--out")
        p.add_argument(
            "--fig",
            action=argparse.BooleanOptionalAction,
            default=True,
            help="render a PNG next to the CSV (on by default; --no-fig to skip)",
        )

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("experiment", choices=EXPERIMENT_IDS)
    add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run an experiment across an axis")
    p_sweep.add_argument("experiment", choices=EXPERIMENT_IDS)
    p_sweep.add_argument("--axis", choices=["n", "k", "eta", "T"], required=True)
    p_sweep.add_argument("--values", nargs="+", required=True)
    add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="run the bound oracles")
    p_verify.add_argument("oracles", nargs="*", default=["all"])
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--out")
    p_verify.set_defaults(func=cmd_verify)

    p_plot = sub.add_parser("plot", help="render a CSV metric to SVG")
    p_plot.add_argument("csv")
    p_plot.add_argument("metric")
    p_plot.add_argument("out")
    p_plot.add_argument("--x", default="trial")
    p_plot.add_argument("--logx", action="store_true")
    p_plot.add_argument("--logy", action="store_true")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScosepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
