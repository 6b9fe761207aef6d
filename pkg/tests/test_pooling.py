import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from auxmi.data import BINARY, Dataset, ModelFormula
from auxmi.errors import SpecError
from auxmi.missingness import ampute_mcar
from auxmi.mice import CompletedDataset
from auxmi.pooling import Estimate, fit_analysis, ld_estimate, mi_estimates, pool_rubin


def est(points, variances, terms=("a",)):
    return Estimate(tuple(terms), np.atleast_1d(np.asarray(points, float)),
                    np.atleast_1d(np.asarray(variances, float)), 100, "linear")


def test_pool_identical_estimates():
    pooled = pool_rubin([est(0.5, 0.01)] * 4)
    assert pooled.q_bar[0] == 0.5
    assert pooled.b[0] == 0.0
    assert pooled.t[0] == 0.01
    assert math.isinf(pooled.df[0])


def test_pool_hand_example():
    pooled = pool_rubin([est(p, 0.0004) for p in (0.10, 0.12, 0.14)])
    assert pooled.q_bar[0] == pytest.approx(0.12, abs=1e-12)
    assert pooled.b[0] == pytest.approx(0.0004, abs=1e-12)
    assert pooled.t[0] == pytest.approx(0.0004 + (4 / 3) * 0.0004, abs=1e-12)
    assert pooled.t[0] == pytest.approx(0.0009333, abs=1e-7)
    assert pooled.df[0] == pytest.approx(6.125, abs=1e-9)


def test_pool_scaling():
    base = [est(p, v) for p, v in ((0.1, 0.01), (0.3, 0.02), (0.2, 0.015))]
    scaled = [est(10 * e.points, 100 * e.variances) for e in base]
    a, b = pool_rubin(base), pool_rubin(scaled)
    assert b.q_bar[0] == pytest.approx(10 * a.q_bar[0])
    assert b.t[0] == pytest.approx(100 * a.t[0])


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-10, 10), min_size=2, max_size=12),
    st.floats(0.001, 5),
    st.floats(-3, 3).filter(lambda a: abs(a) > 1e-3),
    st.floats(-5, 5),
    st.randoms(use_true_random=False),
)
def test_pool_properties(points, var, a, c, rnd):
    ests = [est(p, var * (1 + 0.1 * i)) for i, p in enumerate(points)]
    pooled = pool_rubin(ests)
    assert pooled.t[0] >= pooled.u_bar[0]
    assert pooled.b[0] >= 0
    shuffled = list(ests)
    rnd.shuffle(shuffled)
    again = pool_rubin(shuffled)
    assert again.q_bar[0] == pytest.approx(pooled.q_bar[0], abs=1e-9)
    assert again.t[0] == pytest.approx(pooled.t[0], rel=1e-9)
    affine = pool_rubin([est(a * e.points + c, a * a * e.variances) for e in ests])
    assert affine.q_bar[0] == pytest.approx(a * pooled.q_bar[0] + c, abs=1e-8)
    assert affine.t[0] == pytest.approx(a * a * pooled.t[0], rel=1e-7)


def test_pool_t_equals_u_iff_b_zero():
    pooled = pool_rubin([est(1.0, 0.5), est(1.0, 0.7)])
    assert pooled.t[0] == pooled.u_bar[0]
    pooled = pool_rubin([est(1.0, 0.5), est(1.1, 0.7)])
    assert pooled.t[0] > pooled.u_bar[0]


def test_df_decreasing_in_between_variance():
    dfs = []
    for spread in np.linspace(0.01, 2.0, 25):
        dfs.append(pool_rubin([est(p, 1.0) for p in (-spread, 0.0, spread)]).df[0])
    assert np.all(np.diff(dfs) < 0)


def test_pool_errors():
    with pytest.raises(SpecError):
        pool_rubin([est(1.0, 1.0)])
    with pytest.raises(SpecError):
        pool_rubin([est(1.0, 1.0), est(1.0, 1.0, terms=("b",))])


def analysis_data(n=2000, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    z = rng.normal(size=n)
    y = (rng.random(n) < 1 / (1 + np.exp(-(0.2 + 0.5 * x - 0.3 * z)))).astype(float)
    return Dataset.from_columns({"y": y, "x": x, "z": z}, {"y": BINARY})


def test_ld_on_complete_equals_direct_fit():
    d = analysis_data(300)
    f = ModelFormula("y", ("x", "z"))
    a = ld_estimate(d, f, "logistic")
    b = fit_analysis(d, f, "logistic")
    assert np.array_equal(a.points, b.points)
    assert a.n_used == 300


def test_ld_counts_rows():
    d = ampute_mcar(analysis_data(2000), "x", 0.3, np.random.default_rng(0))
    e = ld_estimate(d, ModelFormula("y", ("x", "z")), "logistic")
    assert e.n_used == 1400


def test_ld_too_few_rows():
    d = Dataset.from_columns({"y": [1.0, np.nan, np.nan, 2.0], "x": [1.0, 2.0, 3.0, 4.0]})
    with pytest.raises(SpecError):
        ld_estimate(d, ModelFormula("y", ("x",)), "linear")


def completed_copies(d, m):
    return [CompletedDataset(d, {}, i, {}, {}) for i in range(m)]


def test_mi_estimates_identical_copies():
    d = analysis_data(500)
    f = ModelFormula("y", ("x", "z"))
    ests = mi_estimates(completed_copies(d, 3), f, "logistic")
    assert len(ests) == 3
    for e in ests:
        assert np.array_equal(e.points, ests[0].points)
        assert e.n_used == 500


def test_mi_estimates_match_direct_refits():
    f = ModelFormula("y", ("x", "z"))
    sets = [analysis_data(400, seed=s) for s in range(3)]
    comp = [CompletedDataset(d, {}, i, {}, {}) for i, d in enumerate(sets)]
    for e, d in zip(mi_estimates(comp, f, "logistic"), sets):
        np.testing.assert_array_equal(e.points, fit_analysis(d, f, "logistic").points)


def test_linear_analysis_variances():
    rng = np.random.default_rng(1)
    x = rng.normal(size=100)
    y = 1 + 2 * x + rng.normal(size=100)
    e = fit_analysis(Dataset.from_columns({"y": y, "x": x}), ModelFormula("y", ("x",)), "linear")
    X = np.column_stack([np.ones(100), x])
    resid = y - X @ e.points
    cov = resid @ resid / 98 * np.linalg.inv(X.T @ X)
    np.testing.assert_allclose(e.variances, np.diag(cov))
