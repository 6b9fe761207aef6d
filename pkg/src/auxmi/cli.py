"""Command-line entry point: ``auxmi run | metrics | generate | impute``.

Failures exit with status 1 and a JSON object on stderr:
``{"error": "<ExceptionClass>", "message": "..."}``.
"""

import argparse
import json
import sys
from pathlib import Path

import yaml

from auxmi import rng as rngmod
from auxmi.data import emit_csv, load_csv, parse_kind
from auxmi.errors import AuxmiError, SpecError
from auxmi.harness.config import load_config, parse_config, with_overrides
from auxmi.harness.metrics import (
    REFERENCE_SE_ROWS,
    analytic_mcar_bounds,
    efficiency_metrics,
    round_pct,
)
from auxmi.harness.report import SUFFIX, emit_report
from auxmi.harness.runner import run_grid
from auxmi.mice import ImputationSpec, VariableModel, impute
from auxmi.simgen import generate_population

FORMATS = ("csv", "markdown", "json")


def _cmd_run(args):
    cfg = load_config(args.config)
    cfg = with_overrides(cfg, seed=args.seed, threads=args.threads)
    out_dir = Path(args.out_dir or cfg.output.dir)
    formats = [args.format] if args.format else cfg.output.formats
    grid = run_grid(cfg)
    written = []
    for fmt in formats:
        path = out_dir / (cfg.output.stem + SUFFIX[fmt])
        emit_report(grid, fmt, path)
        written.append(str(path))
    print(json.dumps({"written": written, "estimand": grid.estimand}))


def _metric_rows(args):
    rows = []
    for se_method, se_ref in args.pair or []:
        e = efficiency_metrics(se_method, se_ref)
        rows.append({"label": "", "se_method": se_method, "se_ref": se_ref, **_eff_fields(e)})
    if args.published:
        for label, sm, sr, dpct, npct in REFERENCE_SE_ROWS:
            e = efficiency_metrics(sm, sr)
            row = {"label": label, "se_method": sm, "se_ref": sr, **_eff_fields(e)}
            row["printed_se_diff_pct"] = dpct
            row["printed_equiv_n_change_pct"] = npct
            rows.append(row)
    for rate in args.rate or []:
        se_red, n_gain = analytic_mcar_bounds(rate)
        rows.append(
            {
                "label": f"analytic MCAR bound, rate {rate:g}",
                "se_method": None,
                "se_ref": None,
                "se_diff": -se_red,
                "equiv_n_change": n_gain,
                "se_diff_pct": round_pct(-se_red),
                "equiv_n_change_pct": round_pct(n_gain),
            }
        )
    if not rows:
        raise SpecError("nothing to compute: give --pair, --published or --rate")
    return rows


def _eff_fields(e):
    return {
        "se_diff": e.se_diff,
        "equiv_n_change": e.equiv_n_change,
        "se_diff_pct": e.se_diff_pct,
        "equiv_n_change_pct": e.equiv_n_change_pct,
    }


def _cmd_metrics(args):
    rows = _metric_rows(args)
    fmt = args.format or "markdown"
    if fmt == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        cols = ["label", "se_method", "se_ref", "se_diff_pct", "equiv_n_change_pct"]
        if args.published:
            cols += ["printed_se_diff_pct", "printed_equiv_n_change_pct"]
        cell = lambda v: "" if v is None else str(v)  # noqa: E731
        if fmt == "csv":
            lines = [",".join(cols)] + [
                ",".join(f'"{cell(r.get(c))}"' if c == "label" else cell(r.get(c)) for c in cols)
                for r in rows
            ]
        else:
            lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)] + [
                "| " + " | ".join(cell(r.get(c)) for c in cols) + " |" for r in rows
            ]
        text = "\n".join(lines) + "\n"
    _write_or_print(text, args.out_dir, "metrics" + SUFFIX[fmt])


def _write_or_print(text, out_dir, name):
    if out_dir:
        path = Path(out_dir) / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        print(json.dumps({"written": [str(path)]}))
    else:
        sys.stdout.write(text)


def _cmd_generate(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = parse_config({"schema_version": 1})
    cfg = with_overrides(cfg, seed=args.seed, population__n=args.n)
    pop = cfg.population.population()
    d, _ = generate_population(pop, rngmod.substream(cfg.seed, "population"))
    out = Path(args.out_dir or ".") / args.output
    out.parent.mkdir(parents=True, exist_ok=True)
    emit_csv(d, out)
    print(json.dumps({"written": [str(out)], "n": d.n_rows, "columns": list(d.names)}))


def _load_impute_spec(path):
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or "variables" not in doc or "models" not in doc:
        raise SpecError("imputation spec needs 'variables' and 'models' sections")
    variables = [(name, parse_kind(kind)) for name, kind in doc["variables"].items()]
    models = {
        var: VariableModel(m["method"], tuple(m.get("predictors", ())))
        for var, m in doc["models"].items()
    }
    return doc, variables, models


def _cmd_impute(args):
    doc, variables, models = _load_impute_spec(args.spec)
    token = doc.get("missing_token", "NA")
    d = load_csv(args.input, variables, missing_token=token)
    spec = ImputationSpec(
        models=models,
        m=args.m or doc.get("m", 5),
        iterations=doc.get("iterations", 10),
        perfect_prediction_policy=doc.get("perfect_prediction_policy", "error"),
    )
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    completed = impute(d, spec, seed, threads=args.threads or 1)
    out_dir = Path(args.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for cd in completed:
        path = out_dir / f"imputation_{cd.index + 1}.csv"
        emit_csv(cd.dataset, path, missing_token=token)
        written.append(str(path))
    summary = {
        "m": spec.m,
        "iterations": spec.iterations,
        "seed": seed,
        "imputations": [
            {
                "index": cd.index + 1,
                "fit_stats": cd.fit_stats,
                "dropped_predictors": cd.dropped,
                "aborted_variables": list(cd.aborted),
            }
            for cd in completed
        ],
    }
    path = out_dir / "imputation_summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(str(path))
    print(json.dumps({"written": written}))


def _pair(text):
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected SE_METHOD,SE_REF, got {text!r}") from None
    return a, b


def build_parser():
    parser = argparse.ArgumentParser(
        prog="auxmi", description="Multiple imputation with auxiliary variables."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt=True):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        if fmt:
            p.add_argument("--format", choices=FORMATS, default=None)
        p.add_argument("--out-dir", default=None)

    p = sub.add_parser("run", help="run a simulation grid from a config file")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("metrics", help="efficiency rows from standard errors")
    p.add_argument(
        "--pair", type=_pair, action="append", metavar="SE_METHOD,SE_REF",
        help="standard error of a method and of the reference (repeatable)",
    )
    p.add_argument("--published", action="store_true",
                   help="recompute the efficiency rows of the bundled reference SEs")
    p.add_argument("--rate", type=float, action="append",
                   help="also print analytic MCAR bounds at this deletion rate")
    common(p)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("generate", help="write a synthetic population as CSV")
    p.add_argument("--config", default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--output", default="population.csv")
    common(p, fmt=False)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("impute", help="multiply impute a CSV file")
    p.add_argument("input")
    p.add_argument("--spec", required=True, help="YAML with variables, models, m, iterations")
    p.add_argument("--m", type=int, default=None)
    common(p, fmt=False)
    p.set_defaults(func=_cmd_impute)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (AuxmiError, OSError, yaml.YAMLError, json.JSONDecodeError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
