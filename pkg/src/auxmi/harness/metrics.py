"""Efficiency arithmetic, analytic listwise-deletion bounds and significance
markers."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from auxmi.errors import SpecError


@dataclass(frozen=True)
class EfficiencyRow:
    """Relative SE change and the equivalent relative change in sample size.

    ``equiv_n_change == (1 + se_diff) ** -2 - 1`` holds exactly because both
    are derived from the same SE ratio.
    """

    se_diff: float
    equiv_n_change: float

    @property
    def se_diff_pct(self):
        return round_pct(self.se_diff)

    @property
    def equiv_n_change_pct(self):
        return round_pct(self.equiv_n_change)


def round_pct(fraction):
    """Nearest integer percent, halves away from zero."""
    x = 100.0 * fraction
    return int(math.copysign(math.floor(abs(x) + 0.5), x)) if x else 0


def format_pct(fraction):
    return f"{round_pct(fraction)}%"


def efficiency_metrics(se_method, se_ref):
    if not (se_method > 0 and se_ref > 0):
        raise SpecError(f"standard errors must be positive (got {se_method}, {se_ref})")
    ratio = se_method / se_ref
    return EfficiencyRow(se_diff=ratio - 1.0, equiv_n_change=ratio**-2 - 1.0)


def analytic_mcar_bounds(rate):
    """SE reduction and sample-size gain of complete data over listwise
    deletion when a fraction ``rate`` of cases is deleted completely at
    random."""
    if not 0 < rate < 1:
        raise SpecError(f"rate must lie in (0, 1), got {rate}")
    return 1.0 - math.sqrt(1.0 - rate), 1.0 / (1.0 - rate) - 1.0


STAR_THRESHOLDS = ((0.001, "***"), (0.01, "**"), (0.05, "*"), (0.10, "†"))


def two_sided_p(point, se, df=math.inf):
    if not se > 0:
        raise SpecError("standard error must be positive")
    t = abs(point / se)
    if df is None or math.isinf(df):
        return float(2 * stats.norm.sf(t))
    if not df > 0:
        raise SpecError("degrees of freedom must be positive")
    return float(2 * stats.t.sf(t, df))


def significance_stars(point, se, df=math.inf):
    p = two_sided_p(point, se, df)
    for cut, marker in STAR_THRESHOLDS:
        if p < cut:
            return marker
    return ""


# Published standard errors (rounded as printed) and the efficiency entries
# printed beside them. Each row: (label, se_method, se_ref, se_diff_pct,
# equiv_n_pct).
REFERENCE_SE_ROWS = (
    ("missing 30% / no auxiliaries", 0.0234, 0.0239, -2, 4),
    ("missing 30% / moderate auxiliaries", 0.0229, 0.0239, -4, 9),
    ("missing 30% / strong auxiliaries", 0.0209, 0.0239, -13, 31),
    ("missing 30% / complete data", 0.0200, 0.0239, -16, 43),
    ("missing 20% / no auxiliaries", 0.0226, 0.0224, 1, -2),
    ("missing 20% / moderate auxiliaries", 0.0217, 0.0224, -3, 6),
    ("missing 20% / strong auxiliaries", 0.0207, 0.0224, -7, 17),
    ("missing 20% / complete data", 0.0200, 0.0224, -11, 25),
    ("missing 10% / no auxiliaries", 0.0212, 0.0211, 1, -1),
    ("missing 10% / moderate auxiliaries", 0.0207, 0.0211, -2, 4),
    ("missing 10% / strong auxiliaries", 0.0203, 0.0211, -4, 8),
    ("missing 10% / complete data", 0.0200, 0.0211, -5, 11),
    ("attainment: high school / MI without auxiliaries", 1.01, 1.02, -1, 1),
    ("attainment: high school / MI with auxiliaries", 0.77, 1.02, -24, 74),
    ("attainment: associate / MI without auxiliaries", 1.60, 1.60, 0, 0),
    ("attainment: associate / MI with auxiliaries", 1.36, 1.60, -15, 38),
    ("attainment: bachelor / MI without auxiliaries", 1.28, 1.29, -1, 1),
    ("attainment: bachelor / MI with auxiliaries", 0.98, 1.29, -24, 71),
    ("attainment: graduate / MI without auxiliaries", 2.63, 2.66, -1, 2),
    ("attainment: graduate / MI with auxiliaries", 2.06, 2.66, -22, 66),
    ("attainment: intercept / MI without auxiliaries", 0.91, 0.92, -1, 2),
    ("attainment: intercept / MI with auxiliaries", 0.72, 0.92, -21, 61),
)

# SE printed with four decimals in the simulation blocks, two in the
# attainment example; the true SE lies within half a unit of the last digit.
def printed_half_unit(se):
    return 0.00005 if se < 0.1 else 0.005


def attainable_from_rounded(se_method, se_ref, diff_pct, equiv_pct, grid=801):
    """Whether some pair of SEs that round to the printed values produces
    both printed percentages."""
    hm, hr = printed_half_unit(se_method), printed_half_unit(se_ref)
    sm = np.linspace(se_method - hm, se_method + hm, grid)[:, None]
    sr = np.linspace(se_ref - hr, se_ref + hr, grid)[None, :]
    ratio = sm / sr

    def pct(x):
        x = 100.0 * x
        return np.copysign(np.floor(np.abs(x) + 0.5), x)

    ok = (pct(ratio - 1.0) == diff_pct) & (pct(ratio**-2 - 1.0) == equiv_pct)
    return bool(ok.any())
