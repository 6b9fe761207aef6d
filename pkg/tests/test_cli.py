import json

import numpy as np

from auxmi.cli import main
from auxmi.data import BINARY, CONTINUOUS, load_csv


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_metrics_pairs_json(capsys):
    code, out, _ = run(["metrics", "--pair", "0.0209,0.0239", "--rate", "0.3", "--format", "json"], capsys)
    assert code == 0
    rows = json.loads(out)
    assert (rows[0]["se_diff_pct"], rows[0]["equiv_n_change_pct"]) == (-13, 31)
    assert (rows[1]["se_diff_pct"], rows[1]["equiv_n_change_pct"]) == (-16, 43)


def test_metrics_published_markdown(capsys):
    code, out, _ = run(["metrics", "--published"], capsys)
    assert code == 0
    assert "printed_se_diff_pct" in out
    assert out.count("\n") == 2 + 22


def test_metrics_without_input_fails(capsys):
    code, _, err = run(["metrics"], capsys)
    assert code == 1
    assert json.loads(err)["error"] == "SpecError"


def test_generate(tmp_path, capsys):
    code, out, _ = run(["generate", "--n", "300", "--seed", "4", "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    info = json.loads(out)
    assert info["n"] == 300
    specs = [(name, BINARY if name in ("y", "x3", "x5", "x7") else CONTINUOUS) for name in info["columns"]]
    d = load_csv(tmp_path / "population.csv", specs)
    assert d.n_rows == 300
    assert list(d.names) == info["columns"]


def test_impute(tmp_path, capsys):
    rng = np.random.default_rng(0)
    x = rng.normal(size=80)
    z = x + rng.normal(size=80)
    lines = ["x,z"] + [
        f"{'NA' if i % 5 == 0 else repr(float(a))},{float(b)!r}" for i, (a, b) in enumerate(zip(x, z))
    ]
    (tmp_path / "in.csv").write_text("\n".join(lines) + "\n")
    (tmp_path / "spec.yaml").write_text(
        "variables:\n  x: continuous\n  z: continuous\n"
        "models:\n  x:\n    method: linear\n    predictors: [z]\nm: 3\niterations: 2\nseed: 5\n"
    )
    out_dir = tmp_path / "out"
    code, out, _ = run(
        ["impute", str(tmp_path / "in.csv"), "--spec", str(tmp_path / "spec.yaml"), "--out-dir", str(out_dir)],
        capsys,
    )
    assert code == 0
    assert len(json.loads(out)["written"]) == 4
    d = load_csv(out_dir / "imputation_2.csv", [("x", CONTINUOUS), ("z", CONTINUOUS)])
    assert d.is_observed("x").all()
    np.testing.assert_array_equal(d.column("z"), z)
    summary = json.loads((out_dir / "imputation_summary.json").read_text())
    assert summary["m"] == 3 and len(summary["imputations"]) == 3


def test_run_small_config(tmp_path, capsys):
    cfg = tmp_path / "grid.yaml"
    cfg.write_text(
        "schema_version: 1\nseed: 2\nreplications: 2\n"
        "population: {n: 300, pilot_n: 5000}\n"
        "missingness: {rates: [0.2]}\n"
        "imputation: {m: 2, iterations: 1, tiers: [strong]}\n"
    )
    code, out, _ = run(["run", str(cfg), "--out-dir", str(tmp_path / "res")], capsys)
    assert code == 0
    written = json.loads(out)["written"]
    assert sorted(p.rsplit(".", 1)[1] for p in written) == ["csv", "json", "md"]
    doc = json.loads((tmp_path / "res" / "report.json").read_text())
    assert [r["cell_id"] for r in doc["results"]] == ["mcar-0.2/ld", "mcar-0.2/mi-strong", "mcar-0.2/complete"]


def test_bad_config_reports_json_error(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("seed: 2\n")
    code, _, err = run(["run", str(cfg)], capsys)
    assert code == 1
    doc = json.loads(err)
    assert doc["error"] == "SpecError"
    assert "schema_version" in doc["message"]


def test_missing_input_file(tmp_path, capsys):
    (tmp_path / "spec.yaml").write_text("variables: {x: continuous}\nmodels: {}\n")
    code, _, err = run(["impute", str(tmp_path / "nope.csv"), "--spec", str(tmp_path / "spec.yaml")], capsys)
    assert code == 1
    assert json.loads(err)["error"] == "FileNotFoundError"
