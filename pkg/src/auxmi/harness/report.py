"""Report rendering: CSV and JSON for machines, markdown laid out like the
familiar LD / MI / complete-data comparison table."""

import csv
import io
import json
import math
from pathlib import Path

from auxmi.errors import SpecError
from auxmi.harness.metrics import analytic_mcar_bounds, efficiency_metrics, format_pct, round_pct
from auxmi.harness.runner import CellResult

CSV_COLUMNS = (
    "cell_id",
    "block",
    "mechanism",
    "rate",
    "estimator",
    "tier",
    "replications",
    "est_mean",
    "est_sd",
    "mean_model_se",
    "mc_se",
    "bias",
    "estimand",
    "mean_r2",
    "se_diff_pct",
    "equiv_n_change_pct",
)


def efficiency_vs_reference(results, reference="ld"):
    """``{cell_id: EfficiencyRow or None}`` against the reference estimator
    of the same block, using empirical SDs."""
    refs = {r.block: r for r in results if r.estimator == reference}
    out = {}
    for r in results:
        ref = refs.get(r.block)
        if ref is None or not (ref.est_sd > 0 and r.est_sd > 0):
            out[r.cell_id] = None
        else:
            out[r.cell_id] = efficiency_metrics(r.est_sd, ref.est_sd)
    return out


def _num(x):
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def render_csv(results, reference="ld"):
    eff = efficiency_vs_reference(results, reference)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in results:
        row = r.to_dict()
        e = eff[r.cell_id]
        row["se_diff_pct"] = "" if e is None else round_pct(e.se_diff)
        row["equiv_n_change_pct"] = "" if e is None else round_pct(e.equiv_n_change)
        writer.writerow([_num(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def _fmt4(x):
    s = f"{x:.4f}"
    return s.replace("0.", ".", 1) if s.startswith("0.") else s.replace("-0.", "-.", 1)


def render_markdown(results, reference="ld", focal="x1"):
    eff = efficiency_vs_reference(results, reference)
    ref_label = "LD" if reference == "ld" else "complete data"
    blocks = []
    for block in dict.fromkeys(r.block for r in results):
        cells = [r for r in results if r.block == block]
        first = cells[0]
        cols = [
            "LD" if c.estimator == "ld"
            else "Complete data" if c.estimator == "complete"
            else f"MI: {c.tier}"
            for c in cells
        ]
        lines = [
            f"### Missing {round_pct(first.rate)}% of values ({first.mechanism})",
            "",
            "| | " + " | ".join(cols) + " |",
            "|---|" + "---|" * len(cols),
        ]

        def row(label, values):
            lines.append(f"| {label} | " + " | ".join(values) + " |")

        row(
            "R² of imputation model",
            [_fmt2(c.mean_r2) if c.mean_r2 is not None else "" for c in cells],
        )
        row(f"Slope of {focal}", [_fmt4(c.est_mean) for c in cells])
        row("Standard error", [f"({_fmt4(c.est_sd)})" for c in cells])
        row(f"Difference in SE vs. {ref_label}", [_eff(eff[c.cell_id], "se_diff", c, reference) for c in cells])
        row(
            f"Equivalent change in sample size vs. {ref_label}",
            [_eff(eff[c.cell_id], "equiv_n_change", c, reference) for c in cells],
        )
        row("Bias vs. pilot estimand", [_fmt4(c.bias) for c in cells])
        row("Mean model-based SE", [_fmt4(c.mean_model_se) for c in cells])
        lines.append("")
        if first.mechanism == "MCAR":
            se_red, n_gain = analytic_mcar_bounds(first.rate)
            lines.append(
                f"Analytic MCAR bound, complete data vs. LD: SE {format_pct(-se_red)}, "
                f"sample size +{format_pct(n_gain)}."
            )
            lines.append("")
        lines.append(
            f"Replications: {first.replications}; pilot estimand: {_fmt4(first.estimand)}."
        )
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def _fmt2(x):
    s = f"{x:.2f}"
    return s[1:] if s.startswith("0.") else s


def _eff(row, field, cell, reference):
    if cell.estimator == reference or row is None:
        return ""
    return format_pct(getattr(row, field))


def render_json(grid_or_results, reference="ld"):
    results, meta = _unpack(grid_or_results)
    eff = efficiency_vs_reference(results, reference)
    doc = {
        "schema_version": 1,
        **meta,
        "results": [r.to_dict() for r in results],
        "efficiency": {
            k: None if v is None else {"se_diff": v.se_diff, "equiv_n_change": v.equiv_n_change}
            for k, v in eff.items()
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _unpack(obj):
    if hasattr(obj, "results"):
        return list(obj.results), {
            "config": obj.config.model_dump(mode="json"),
            "estimand": obj.estimand,
        }
    return list(obj), {}


def load_json_results(text):
    doc = json.loads(text)
    return [CellResult(**r) for r in doc["results"]]


def emit_report(grid_or_results, fmt, path, reference=None, focal=None):
    results, _ = _unpack(grid_or_results)
    if not results:
        raise SpecError("no results to report")
    cfg = getattr(grid_or_results, "config", None)
    reference = reference or (cfg.reference if cfg else "ld")
    focal = focal or (cfg.focal_term if cfg else "x1")
    if fmt == "csv":
        text = render_csv(results, reference)
    elif fmt == "markdown":
        text = render_markdown(results, reference, focal)
    elif fmt == "json":
        text = render_json(grid_or_results, reference)
    else:
        raise SpecError(f"unknown report format {fmt!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


SUFFIX = {"csv": ".csv", "markdown": ".md", "json": ".json"}
