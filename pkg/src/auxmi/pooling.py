"""Analysis-model fits and Rubin's combining rules."""

import math
from dataclasses import dataclass

import numpy as np

from auxmi.data import listwise_complete
from auxmi.errors import AuxmiError, SpecError
from auxmi.regressors import fit_linear, fit_logistic


@dataclass(frozen=True)
class Estimate:
    terms: tuple
    points: np.ndarray
    variances: np.ndarray
    n_used: int
    model_kind: str

    def point(self, term):
        return float(self.points[self.terms.index(term)])

    def se(self, term):
        return math.sqrt(self.variances[self.terms.index(term)])


@dataclass(frozen=True)
class PooledEstimate:
    """Per-term pooled results; ``df`` is ``inf`` when ``b == 0``."""

    terms: tuple
    q_bar: np.ndarray
    u_bar: np.ndarray
    b: np.ndarray
    t: np.ndarray
    df: np.ndarray
    m: int

    def index(self, term):
        return self.terms.index(term)

    def se(self, term):
        return math.sqrt(self.t[self.index(term)])


def fit_analysis(d, f, kind):
    """Fit the analysis model on a fully observed dataset."""
    if kind == "linear":
        fit = fit_linear(d, f)
        variances = np.diag(fit.cov).copy()
    elif kind == "logistic":
        fit = fit_logistic(d, f)
        if fit.separation_detected:
            raise AuxmiError("analysis model separates the response; estimates diverge")
        variances = np.diag(fit.cov).copy()
    else:
        raise SpecError(f"unknown analysis model kind {kind!r}")
    return Estimate(fit.terms, fit.coef.copy(), variances, fit.n, kind)


def ld_estimate(d, f, kind):
    """Listwise deletion: fit on rows observed on every formula variable."""
    f.check(d)
    complete = listwise_complete(d, f.variables)
    p = len(f.predictors) + 1
    if complete.n_rows <= p:
        raise SpecError(
            f"only {complete.n_rows} complete rows for {p} parameters under listwise deletion"
        )
    return fit_analysis(complete, f, kind)


def mi_estimates(completed, f, kind):
    if len(completed) < 2:
        raise SpecError("multiple imputation needs at least 2 completed datasets")
    out = []
    for cd in completed:
        try:
            out.append(fit_analysis(cd.dataset, f, kind))
        except AuxmiError as exc:
            raise type(exc)(f"imputation {cd.index}: {exc}") from exc
    return out


def rubin_df(m, u_bar, b):
    if b == 0:
        return math.inf
    r = (1 + 1 / m) * b / u_bar if u_bar > 0 else math.inf
    if math.isinf(r):
        return float(m - 1)
    return (m - 1) * (1 + 1 / r) ** 2


def pool_rubin(estimates):
    m = len(estimates)
    if m < 2:
        raise SpecError("pooling needs at least 2 estimates")
    terms = estimates[0].terms
    for e in estimates[1:]:
        if e.terms != terms:
            raise SpecError(f"mismatched terms: {e.terms} vs {terms}")
    points = np.array([e.points for e in estimates], dtype=float)
    variances = np.array([e.variances for e in estimates], dtype=float)
    q_bar = points.mean(axis=0)
    u_bar = variances.mean(axis=0)
    b = points.var(axis=0, ddof=1)
    # identical points can leave rounding-level between-variance
    b[np.all(points == points[0], axis=0)] = 0.0
    t = u_bar + (1 + 1 / m) * b
    df = np.array([rubin_df(m, u, bb) for u, bb in zip(u_bar, b)])
    return PooledEstimate(terms, q_bar, u_bar, b, t, df, m)
