"""Acceptance criteria, each run at its stated tolerance.

Every test appends one ``CRITERION n: PASS|FAIL ...`` line that the terminal
summary prints, then asserts. A criterion that fails here is left failing.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import expit

from auxmi.data import Dataset, ModelFormula
from auxmi.harness.config import parse_config
from auxmi.harness.metrics import (
    REFERENCE_SE_ROWS,
    analytic_mcar_bounds,
    attainable_from_rounded,
    efficiency_metrics,
    round_pct,
    significance_stars,
    two_sided_p,
)
from auxmi.harness.report import render_json
from auxmi.harness.runner import run_grid
from auxmi.pooling import Estimate, pool_rubin
from auxmi.regressors import fit_linear, logistic_fit_arrays, ordinal_fit_arrays

from conftest import ACCEPTANCE_LINES
from test_regressors import SIX_X, SIX_Y, grid_refine_mle


def record(n, ok, detail):
    ACCEPTANCE_LINES.append(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


def test_criterion_1_table_arithmetic():
    start = time.perf_counter()
    mismatches = []
    wrong_entries = 0
    for label, se_method, se_ref, diff_pct, equiv_pct in REFERENCE_SE_ROWS:
        e = efficiency_metrics(se_method, se_ref)
        got = (e.se_diff_pct, e.equiv_n_change_pct)
        if got != (diff_pct, equiv_pct):
            wrong_entries += (got[0] != diff_pct) + (got[1] != equiv_pct)
            mismatches.append(f"{label}: got {got}, printed {(diff_pct, equiv_pct)}")
    elapsed = time.perf_counter() - start
    attainable = all(attainable_from_rounded(*row[1:]) for row in REFERENCE_SE_ROWS)
    ok = not mismatches and elapsed < 1.0
    record(
        1, ok,
        f"{wrong_entries} of {2 * len(REFERENCE_SE_ROWS)} printed entries not reproduced from the "
        f"rounded SEs; every row reachable from SEs inside their rounding interval: {attainable}; "
        f"{elapsed * 1000:.1f} ms",
    )
    assert ok, "\n".join(mismatches)


def test_criterion_2_analytic_bounds():
    start = time.perf_counter()
    got = {}
    for rate in (0.1, 0.2, 0.3):
        se_red, n_gain = analytic_mcar_bounds(rate)
        got[rate] = (round_pct(se_red), round_pct(n_gain))
    se_red, n_gain = analytic_mcar_bounds(0.3)
    identities = (
        round(n_gain, 2) == 0.43
        and n_gain == 1 / (1 - 0.3) - 1
        and round(se_red, 2) == 0.16
        and se_red == 1 - math.sqrt(0.7)
    )
    elapsed = time.perf_counter() - start
    ok = got == {0.1: (5, 11), 0.2: (11, 25), 0.3: (16, 43)} and identities and elapsed < 1.0
    record(2, ok, f"(SE reduction %, n gain %) by rate {got}; {elapsed * 1000:.2f} ms")
    assert ok


def table_config(**extra):
    doc = {
        "schema_version": 1,
        "seed": 20120335,
        "replications": 100,
        "population": {"n": 2000, "base_r2": 0.14,
                       "aux_tiers": {"moderate": 0.45, "strong": 0.62}},
        "missingness": {"mechanism": "mcar", "target": "x1", "rates": [0.3]},
        "imputation": {"m": 20, "iterations": 10, "tiers": ["none", "moderate", "strong"]},
        "estimators": ["ld", "mi", "complete"],
    }
    for key, value in extra.items():
        if isinstance(value, dict):
            doc[key] = {**doc.get(key, {}), **value}
        else:
            doc[key] = value
    return parse_config(doc)


def by_column(grid):
    return {r.cell_id.split("/")[1]: r for r in grid.results}


@pytest.mark.slow
def test_criterion_3_structural_replication():
    start = time.perf_counter()
    cfg = table_config()
    res = by_column(run_grid(cfg))
    elapsed = time.perf_counter() - start
    sd = {k: r.est_sd for k, r in res.items()}
    ordering = sd["complete"] <= sd["mi-strong"] <= sd["mi-moderate"] <= sd["mi-none"]
    strong_close = abs(sd["mi-strong"] - sd["complete"]) <= 0.10 * sd["complete"]
    none_close = abs(sd["mi-none"] - sd["ld"]) <= 0.05 * sd["ld"]
    unbiased = {k: abs(r.bias) < 3 * r.mc_se for k, r in res.items()}
    ok = ordering and strong_close and none_close and all(unbiased.values()) and elapsed < 600
    sds = ", ".join(f"{k} {v:.4f}" for k, v in sd.items())
    biased = [k for k, v in unbiased.items() if not v]
    record(
        3, ok,
        f"empirical SDs {sds}; ordering {ordering}, strong within 10% of complete {strong_close}, "
        f"none within 5% of LD {none_close}, bias >= 3 MC SE in {biased}; {elapsed:.0f} s",
    )
    assert ok


@pytest.mark.slow
def test_criterion_4_ld_bias_under_selection_on_y():
    start = time.perf_counter()
    cfg = table_config(
        replications=200,
        population={"n": 5000, "resample": True},
        missingness={"mechanism": "mar", "rates": [0.3], "score": {"y": 2.0}},
        imputation={"tiers": ["strong"]},
        estimators=["ld", "mi"],
    )
    res = by_column(run_grid(cfg))
    elapsed = time.perf_counter() - start
    ld, mi = res["ld"], res["mi-strong"]
    ld_z, mi_z = abs(ld.bias) / ld.mc_se, abs(mi.bias) / mi.mc_se
    ok = ld_z > 3 and mi_z <= 3 and elapsed < 900
    record(
        4, ok,
        f"|bias|/MC SE: LD {ld_z:.2f} (needs > 3), MI strong {mi_z:.2f} (needs <= 3); {elapsed:.0f} s",
    )
    assert ok


def test_criterion_5_unit_oracles():
    start = time.perf_counter()
    rng = np.random.default_rng(5)
    linear_err = 0.0
    for _ in range(100):
        n, p = rng.integers(10, 200), rng.integers(1, 6)
        X = rng.normal(size=(n, p))
        y = X @ rng.normal(size=p) + rng.normal(size=n)
        cols = {f"v{j}": X[:, j] for j in range(p)}
        fit = fit_linear(Dataset.from_columns({"y": y, **cols}), ModelFormula("y", tuple(cols)))
        Xi = np.column_stack([np.ones(n), X])
        oracle = np.linalg.solve(Xi.T @ Xi, Xi.T @ y)
        linear_err = max(linear_err, float(np.max(np.abs(fit.coef - oracle))))

    X6 = np.column_stack([np.ones(6), SIX_X])
    six = logistic_fit_arrays(X6, SIX_Y, ("i", "x"))
    grid_err = float(np.max(np.abs(six.coef - np.array(grid_refine_mle(SIX_X, SIX_Y)))))
    n = 500
    Xg = np.column_stack([np.ones(n), rng.normal(size=(n, 3))])
    yg = (rng.random(n) < expit(Xg @ [0.3, 1.0, -0.5, 0.2])).astype(float)
    glm = logistic_fit_arrays(Xg, yg, ("i", "a", "b", "c"))
    grad = float(np.max(np.abs(Xg.T @ (yg - expit(Xg @ glm.coef)))))

    ordf = ordinal_fit_arrays(Xg[:, 1:], yg.astype(int), (0, 1), ("a", "b", "c"))
    ord_err = max(
        abs(ordf.thresholds[0] + glm.coef[0]), float(np.max(np.abs(ordf.coef - glm.coef[1:])))
    )

    pooled = pool_rubin(
        [Estimate(("a",), np.array([p]), np.array([0.0004]), 100, "linear") for p in (0.10, 0.12, 0.14)]
    )
    rubin_ok = (
        abs(pooled.q_bar[0] - 0.12) < 1e-9
        and abs(pooled.t[0] - 0.0004 * (1 + 4 / 3)) < 1e-9
        and abs(round(pooled.t[0], 7) - 0.0009333) < 1e-9
        and abs(pooled.df[0] - 6.125) < 1e-9
    )
    elapsed = time.perf_counter() - start
    ok = linear_err < 1e-8 and grad < 1e-6 and grid_err < 1e-4 and ord_err < 1e-6 and rubin_ok
    record(
        5, ok,
        f"linear max err {linear_err:.1e}, logistic gradient {grad:.1e}, grid oracle err "
        f"{grid_err:.1e}, ordinal K=2 err {ord_err:.1e}, pooling example {rubin_ok}; {elapsed:.1f} s",
    )
    assert ok


def test_criterion_6_serial_parallel_identical(tmp_path):
    cfg = table_config(
        seed=11,
        replications=4,
        population={"n": 500, "pilot_n": 50_000},
        missingness={"rates": [0.3, 0.1]},
        imputation={"m": 3, "iterations": 3},
    )
    serial = render_json(run_grid(cfg, threads=1)).encode()
    parallel = render_json(run_grid(cfg, threads=3)).encode()
    ok = serial == parallel
    record(6, ok, f"serial and 3-process JSON reports byte-identical: {ok} ({len(serial)} bytes)")
    assert ok


def test_criterion_7_significance_stars():
    before = significance_stars(-4.68, 2.66)
    after = significance_stars(-5.01, 2.06)
    ok = before == "†" and after == "*"
    record(
        7, ok,
        f"p {two_sided_p(-4.68, 2.66):.4f} -> '{before}', p {two_sided_p(-5.01, 2.06):.4f} -> '{after}'",
    )
    assert ok
