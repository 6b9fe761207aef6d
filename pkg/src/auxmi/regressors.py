"""Conditional regression models used for imputation and analysis.

Three engines share one shape: a fit object holding point estimates and a
covariance, :func:`draw_parameters` to sample from the approximate posterior
of the parameters, and :func:`impute_draw` to sample new response values.

Linear and logistic designs always carry an intercept as their first
column. The proportional-odds model has no intercept; its thresholds play
that role. With ``P(Y <= k) = expit(theta_k - x'beta)`` a two-level ordinal
fit has ``theta_1 = -intercept`` and the same slopes as a logistic fit of
the indicator ``Y == levels[1]``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import expit, log_expit

from auxmi.data import Binary, Ordinal
from auxmi.errors import ConvergenceError, RankDeficiencyError, SpecError

INTERCEPT = "(Intercept)"

RANK_TOL = 1e-10
MAX_ITER = 50
STEP_TOL = 1e-10
MAX_HALVINGS = 40
# |linear predictor| beyond this puts a fitted probability within 1e-10 of 0 or 1
SEPARATION_ETA = float(np.log((1 - 1e-10) / 1e-10))
DIVERGENCE_BOUND = 1e4
MAX_REDRAWS = 100


@dataclass(frozen=True)
class LinearFit:
    terms: tuple
    coef: np.ndarray
    sigma2_hat: float
    xtx_inverse: np.ndarray = field(repr=False)
    r2: float
    dof_resid: int
    n: int

    @property
    def fit_stat(self):
        return self.r2

    @property
    def cov(self):
        return self.sigma2_hat * self.xtx_inverse


@dataclass(frozen=True)
class GlmFit:
    terms: tuple
    coef: np.ndarray
    cov: np.ndarray = field(repr=False)
    loglik: float
    loglik_null: float
    pseudo_r2: float
    converged: bool
    separation_detected: bool
    iterations: int
    n: int
    max_abs_score: float = 0.0

    @property
    def fit_stat(self):
        return self.pseudo_r2


@dataclass(frozen=True)
class OrdinalFit:
    """``cov`` is over the stacked vector ``(thresholds, coef)``."""

    terms: tuple
    levels: tuple
    coef: np.ndarray
    thresholds: np.ndarray
    cov: np.ndarray = field(repr=False)
    loglik: float
    loglik_null: float
    pseudo_r2: float
    converged: bool
    separation_detected: bool
    iterations: int
    n: int
    max_abs_score: float = 0.0

    @property
    def fit_stat(self):
        return self.pseudo_r2


@dataclass(frozen=True)
class ParameterDraw:
    model_kind: str
    coef_draw: np.ndarray
    dispersion_draw: float = None
    thresholds: np.ndarray = None
    levels: tuple = None


# -- design helpers -----------------------------------------------------------


def design_matrix(d, predictors, intercept=True):
    X = d.matrix(predictors)
    if intercept:
        X = np.column_stack([np.ones(d.n_rows), X])
    return X


def _terms(predictors, intercept=True):
    return ((INTERCEPT,) if intercept else ()) + tuple(predictors)


def _psd_factor(cov):
    """Lower factor L with L @ L.T == cov, tolerating semidefinite input."""
    cov = 0.5 * (cov + cov.T)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


# -- linear -------------------------------------------------------------------


def linear_fit_arrays(X, y, terms):
    n, p = X.shape
    if n <= p:
        raise SpecError(f"linear fit needs more rows than parameters (n={n}, p={p})")
    Q, R, piv = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = RANK_TOL * np.max(np.linalg.norm(X, axis=0))
    rank = int(np.count_nonzero(diag > tol))
    if rank < p:
        bad = terms[piv[rank]]
        raise RankDeficiencyError(
            f"design is rank deficient (rank {rank} < {p}); {bad!r} is linearly "
            "dependent on the other columns",
            column=bad,
        )
    coef_piv = linalg.solve_triangular(R, Q.T @ y)
    coef = np.empty(p)
    coef[piv] = coef_piv
    r_inv = linalg.solve_triangular(R, np.eye(p))
    xtx_piv = r_inv @ r_inv.T
    xtx_inverse = np.empty((p, p))
    xtx_inverse[np.ix_(piv, piv)] = xtx_piv
    xtx_inverse = 0.5 * (xtx_inverse + xtx_inverse.T)
    resid = y - X @ coef
    sse = float(resid @ resid)
    sst = float(np.sum((y - y.mean()) ** 2))
    dof = n - p
    if sst > 0:
        r2 = min(max(1.0 - sse / sst, 0.0), 1.0)
    else:
        r2 = 0.0
    # exact fits leave rounding-level residuals; treat them as zero
    if sse <= (1e-28 * max(sst, 1.0) * n):
        sse = 0.0
    return LinearFit(
        terms=tuple(terms),
        coef=coef,
        sigma2_hat=sse / dof,
        xtx_inverse=xtx_inverse,
        r2=r2,
        dof_resid=dof,
        n=n,
    )


def fit_linear(d, f):
    """Ordinary least squares of ``f.response`` on an intercept plus
    ``f.predictors``. All formula variables must be fully observed in ``d``."""
    f.check(d)
    X = design_matrix(d, f.predictors)
    y = d.matrix([f.response])[:, 0]
    return linear_fit_arrays(X, y, _terms(f.predictors))


# -- logistic -----------------------------------------------------------------


def _logistic_loglik(eta, y):
    return float(np.sum(y * log_expit(eta) + (1 - y) * log_expit(-eta)))


def _bernoulli_null_loglik(y):
    n = len(y)
    k = float(np.sum(y))
    ll = 0.0
    if 0 < k:
        ll += k * np.log(k / n)
    if k < n:
        ll += (n - k) * np.log((n - k) / n)
    return float(ll)


def logistic_fit_arrays(X, y, terms):
    """Newton-Raphson maximum likelihood with step halving.

    Separation is flagged (never raised); genuine non-convergence raises.
    """
    n, p = X.shape
    if n <= p:
        raise SpecError(f"logistic fit needs more rows than parameters (n={n}, p={p})")
    if not np.all((y == 0) | (y == 1)):
        raise SpecError("logistic response must be coded 0/1")
    beta = np.zeros(p)
    eta = X @ beta
    ll = _logistic_loglik(eta, y)
    converged = separated = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        prob = expit(eta)
        w = prob * (1 - prob)
        score = X.T @ (y - prob)
        hess = (X * w[:, None]).T @ X
        try:
            step = linalg.solve(hess, score, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            step = np.linalg.lstsq(hess, score, rcond=None)[0]
        t = 1.0
        for _ in range(MAX_HALVINGS):
            cand = beta + t * step
            cand_eta = X @ cand
            cand_ll = _logistic_loglik(cand_eta, y)
            if cand_ll >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        else:
            cand, cand_eta, cand_ll = beta, eta, ll
        change = float(np.max(np.abs(cand - beta))) if p else 0.0
        beta, eta, ll = cand, cand_eta, cand_ll
        if np.max(np.abs(eta)) > SEPARATION_ETA or np.max(np.abs(beta)) > DIVERGENCE_BOUND:
            separated = True
            break
        if change < STEP_TOL:
            converged = True
            break
    if not converged and not separated:
        if np.max(np.abs(eta)) > 0.5 * SEPARATION_ETA:
            separated = True
        else:
            raise ConvergenceError(
                f"logistic fit did not converge after {it} iterations", iterations=it
            )
    prob = expit(eta)
    w = prob * (1 - prob)
    score = X.T @ (y - prob)
    hess = (X * w[:, None]).T @ X
    try:
        cov = linalg.inv(hess)
    except (linalg.LinAlgError, ValueError):
        cov = np.linalg.pinv(hess)
    cov = 0.5 * (cov + cov.T)
    ll0 = _bernoulli_null_loglik(y)
    if ll0 == 0.0:
        # constant response: the intercept diverges
        separated = True
    pseudo = 1.0 - ll / ll0 if ll0 < 0 else float("nan")
    return GlmFit(
        terms=tuple(terms),
        coef=beta,
        cov=cov,
        loglik=ll,
        loglik_null=ll0,
        pseudo_r2=pseudo,
        converged=converged and not separated,
        separation_detected=separated,
        iterations=it,
        n=n,
        max_abs_score=float(np.max(np.abs(score))) if p else 0.0,
    )


def fit_logistic(d, f):
    f.check(d)
    if not isinstance(d.kind(f.response), Binary):
        raise SpecError(f"logistic response {f.response!r} must be a binary variable")
    X = design_matrix(d, f.predictors)
    y = d.matrix([f.response])[:, 0]
    return logistic_fit_arrays(X, y, _terms(f.predictors))


# -- proportional odds ----------------------------------------------------------


def _ordinal_pieces(theta, beta, X, idx, K):
    """Upper/lower linear arguments and log-likelihood terms per row."""
    eta = X @ beta if X.shape[1] else np.zeros(len(idx))
    has_up = idx < K - 1
    has_lo = idx > 0
    up = np.where(has_up, theta[np.minimum(idx, K - 2)] - eta, np.inf)
    lo = np.where(has_lo, theta[np.maximum(idx - 1, 0)] - eta, -np.inf)
    return eta, up, lo, has_up, has_lo


def _cell_log_prob(up, lo):
    # log(F(up) - F(lo)) computed stably
    fu = expit(up)
    fl = expit(lo)
    prob = fu - fl
    # upper-tail form is more accurate when both arguments are large
    alt = expit(-lo) - expit(-up)
    prob = np.where(lo > 0, alt, prob)
    with np.errstate(divide="ignore"):
        return np.log(np.clip(prob, 1e-300, None)), prob


def _ordinal_loglik(theta, beta, X, idx, K):
    _, up, lo, _, _ = _ordinal_pieces(theta, beta, X, idx, K)
    logp, _ = _cell_log_prob(up, lo)
    return float(np.sum(logp))


def _ordinal_derivatives(theta, beta, X, idx, K):
    n, p = X.shape
    q = K - 1 + p
    eta, up, lo, has_up, has_lo = _ordinal_pieces(theta, beta, X, idx, K)
    _, prob = _cell_log_prob(up, lo)
    prob = np.clip(prob, 1e-300, None)
    fu = np.where(has_up, expit(up), 1.0)
    fl = np.where(has_lo, expit(lo), 0.0)
    du = fu * (1 - fu)  # density at upper cutpoint, 0 if absent
    dl = fl * (1 - fl)
    d2u = du * (1 - 2 * fu)
    d2l = dl * (1 - 2 * fl)
    g_a = du / prob
    g_b = -dl / prob
    h_aa = d2u / prob - g_a**2
    h_bb = -d2l / prob - g_b**2
    h_ab = du * dl / prob**2
    A = np.zeros((n, q))
    B = np.zeros((n, q))
    rows = np.arange(n)
    A[rows[has_up], idx[has_up]] = 1.0
    B[rows[has_lo], idx[has_lo] - 1] = 1.0
    A[:, K - 1 :] = -X * has_up[:, None]
    B[:, K - 1 :] = -X * has_lo[:, None]
    grad = A.T @ g_a + B.T @ g_b
    hess = (
        (A * h_aa[:, None]).T @ A
        + (A * h_ab[:, None]).T @ B
        + (B * h_ab[:, None]).T @ A
        + (B * h_bb[:, None]).T @ B
    )
    return grad, 0.5 * (hess + hess.T), up, lo, has_up, has_lo


def ordinal_fit_arrays(X, idx, levels, terms):
    """Cumulative-logit maximum likelihood. ``idx`` holds 0-based level ranks."""
    n, p = X.shape
    K = len(levels)
    counts = np.bincount(idx, minlength=K)
    if np.any(counts == 0):
        missing = [levels[k] for k in np.flatnonzero(counts == 0)]
        raise SpecError(
            f"ordinal levels {missing} are never observed; collapse them before fitting"
        )
    if n <= p + K - 1:
        raise SpecError(f"ordinal fit needs n > p + K - 1 (n={n}, p={p}, K={K})")
    cum = np.cumsum(counts)[:-1] / n
    theta = np.log(cum / (1 - cum))
    beta = np.zeros(p)
    ll = _ordinal_loglik(theta, beta, X, idx, K)
    converged = separated = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        grad, hess, *_ = _ordinal_derivatives(theta, beta, X, idx, K)
        try:
            step = linalg.solve(-hess, grad, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            step = np.linalg.lstsq(-hess, grad, rcond=None)[0]
        t = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS):
            cand_theta = theta + t * step[: K - 1]
            cand_beta = beta + t * step[K - 1 :]
            if np.all(np.diff(cand_theta) > 0):
                cand_ll = _ordinal_loglik(cand_theta, cand_beta, X, idx, K)
                if cand_ll >= ll - 1e-12 * abs(ll):
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            cand_theta, cand_beta, cand_ll = theta, beta, ll
        change = float(
            np.max(np.abs(np.concatenate([cand_theta - theta, cand_beta - beta])))
        )
        theta, beta, ll = cand_theta, cand_beta, cand_ll
        _, up, lo, has_up, has_lo = _ordinal_pieces(theta, beta, X, idx, K)
        edge = np.concatenate([np.abs(up[has_up]), np.abs(lo[has_lo])])
        if (edge.size and edge.max() > SEPARATION_ETA) or np.max(
            np.abs(np.concatenate([theta, beta]))
        ) > DIVERGENCE_BOUND:
            separated = True
            break
        if change < STEP_TOL:
            converged = True
            break
    if not converged and not separated:
        _, up, lo, has_up, has_lo = _ordinal_pieces(theta, beta, X, idx, K)
        edge = np.concatenate([np.abs(up[has_up]), np.abs(lo[has_lo])])
        if edge.size and edge.max() > 0.5 * SEPARATION_ETA:
            separated = True
        else:
            raise ConvergenceError(
                f"ordinal fit did not converge after {it} iterations", iterations=it
            )
    grad, hess, *_ = _ordinal_derivatives(theta, beta, X, idx, K)
    try:
        cov = linalg.inv(-hess)
    except (linalg.LinAlgError, ValueError):
        cov = np.linalg.pinv(-hess)
    cov = 0.5 * (cov + cov.T)
    ll0 = float(np.sum(counts * np.log(counts / n)))
    pseudo = 1.0 - ll / ll0 if ll0 < 0 else float("nan")
    return OrdinalFit(
        terms=tuple(terms),
        levels=tuple(levels),
        coef=beta,
        thresholds=theta,
        cov=cov,
        loglik=ll,
        loglik_null=ll0,
        pseudo_r2=pseudo,
        converged=converged and not separated,
        separation_detected=separated,
        iterations=it,
        n=n,
        max_abs_score=float(np.max(np.abs(grad))),
    )


def ordinal_ranks(values, levels):
    lookup = {float(c): i for i, c in enumerate(levels)}
    try:
        return np.array([lookup[float(v)] for v in values], dtype=int)
    except KeyError as exc:
        raise SpecError(f"value {exc.args[0]!r} is not a declared ordinal level") from None


def fit_ordinal(d, f):
    f.check(d)
    kind = d.kind(f.response)
    if not isinstance(kind, Ordinal):
        raise SpecError(f"ordinal response {f.response!r} must be an ordinal variable")
    X = d.matrix(f.predictors)
    y = d.matrix([f.response])[:, 0]
    return ordinal_fit_arrays(X, ordinal_ranks(y, kind.levels), kind.levels, f.predictors)


# -- posterior draws and imputation ------------------------------------------------


def mcfadden_pseudo_r2(fit):
    if fit.loglik_null == 0:
        raise SpecError("null log-likelihood is zero (constant response); pseudo-R2 undefined")
    return 1.0 - fit.loglik / fit.loglik_null


def draw_parameters(fit, rng):
    """One draw from the approximate posterior of ``fit``'s parameters.

    Linear fits use the normal / scaled inverse-chi-square posterior under a
    flat prior; likelihood fits use the normal approximation at the MLE.
    """
    if isinstance(fit, LinearFit):
        if fit.sigma2_hat == 0:
            return ParameterDraw("linear", fit.coef.copy(), 0.0)
        dispersion = fit.sigma2_hat * fit.dof_resid / rng.chisquare(fit.dof_resid)
        L = _psd_factor(fit.xtx_inverse)
        z = rng.standard_normal(len(fit.coef))
        return ParameterDraw("linear", fit.coef + np.sqrt(dispersion) * (L @ z), dispersion)
    if fit.separation_detected or not fit.converged:
        raise SpecError("cannot draw parameters from a separated or unconverged fit")
    if isinstance(fit, GlmFit):
        L = _psd_factor(fit.cov)
        z = rng.standard_normal(len(fit.coef))
        return ParameterDraw("logistic", fit.coef + L @ z)
    if isinstance(fit, OrdinalFit):
        k = len(fit.thresholds)
        mean = np.concatenate([fit.thresholds, fit.coef])
        L = _psd_factor(fit.cov)
        for _ in range(MAX_REDRAWS):
            draw = mean + L @ rng.standard_normal(len(mean))
            if np.all(np.diff(draw[:k]) > 0):
                return ParameterDraw(
                    "ordinal", draw[k:], thresholds=draw[:k], levels=fit.levels
                )
        raise ConvergenceError(
            f"no increasing threshold draw in {MAX_REDRAWS} attempts", iterations=MAX_REDRAWS
        )
    raise TypeError(f"unsupported fit type {type(fit).__name__}")


def ordinal_cell_probs(thresholds, coef, X):
    eta = X @ coef if X.shape[1] else np.zeros(X.shape[0])
    cum = expit(thresholds[None, :] - eta[:, None])
    cum = np.column_stack([np.zeros(len(eta)), cum, np.ones(len(eta))])
    return np.diff(cum, axis=1)


def impute_draw(params, X, rng):
    """Sample responses for the rows of ``X`` (predictors, no intercept)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if params.model_kind == "linear":
        mu = params.coef_draw[0] + X @ params.coef_draw[1:]
        if params.dispersion_draw:
            mu = mu + np.sqrt(params.dispersion_draw) * rng.standard_normal(n)
        return mu
    if params.model_kind == "logistic":
        prob = expit(params.coef_draw[0] + X @ params.coef_draw[1:])
        return (rng.random(n) < prob).astype(float)
    if params.model_kind == "ordinal":
        eta = X @ params.coef_draw if X.shape[1] else np.zeros(n)
        cum = expit(params.thresholds[None, :] - eta[:, None])
        u = rng.random(n)
        idx = np.sum(u[:, None] > cum, axis=1)
        return np.asarray(params.levels, dtype=float)[idx]
    raise SpecError(f"unknown model kind {params.model_kind!r}")


METHOD_FOR_KIND = {"continuous": "linear", "binary": "logistic", "ordinal": "ordinal"}


def fit_arrays(method, X, y, predictors, levels=None):
    """Dispatch used by the imputation engine; ``X`` excludes the intercept."""
    if method == "linear":
        return linear_fit_arrays(np.column_stack([np.ones(len(y)), X]), y, _terms(predictors))
    if method == "logistic":
        return logistic_fit_arrays(np.column_stack([np.ones(len(y)), X]), y, _terms(predictors))
    if method == "ordinal":
        return ordinal_fit_arrays(X, ordinal_ranks(y, levels), levels, tuple(predictors))
    raise SpecError(f"unknown imputation method {method!r}")
