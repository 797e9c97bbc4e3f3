"""Agreement and significance statistics for rating studies."""

from __future__ import annotations

import csv
import math
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgument, UndefinedStatistic


# --------------------------------------------------------------------------- #
# Krippendorff's alpha
# --------------------------------------------------------------------------- #
def read_ratings_csv(path) -> np.ndarray:
    """Rows are raters, columns are items; blank cells are missing (NaN)."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            rows.append([float(v) if v.strip() else np.nan for v in row])
    width = max(len(r) for r in rows)
    return np.array([r + [np.nan] * (width - len(r)) for r in rows], dtype=float)


def _coincidences(ratings: np.ndarray):
    values = np.unique(ratings[~np.isnan(ratings)])
    index = {v: i for i, v in enumerate(values)}
    o = np.zeros((len(values), len(values)))
    for col in ratings.T:
        present = col[~np.isnan(col)]
        m = len(present)
        if m < 2:
            continue
        for i, a in enumerate(present):
            for j, b in enumerate(present):
                if i != j:
                    o[index[a], index[b]] += 1.0 / (m - 1)
    return values, o


def _delta2(values: np.ndarray, n_c: np.ndarray, level: str) -> np.ndarray:
    k = len(values)
    if level == "nominal":
        return 1.0 - np.eye(k)
    if level == "interval":
        return (values[:, None] - values[None, :]) ** 2
    if level == "ratio":
        s = values[:, None] + values[None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            d = ((values[:, None] - values[None, :]) / s) ** 2
        return np.nan_to_num(d)
    if level == "ordinal":
        cum = np.concatenate([[0.0], np.cumsum(n_c)])
        d = np.zeros((k, k))
        for c in range(k):
            for j in range(k):
                lo, hi = min(c, j), max(c, j)
                d[c, j] = (cum[hi + 1] - cum[lo] - (n_c[c] + n_c[j]) / 2.0) ** 2
        return d
    raise InvalidArgument(f"unknown measurement level {level!r}")


def krippendorff_alpha(ratings, level: str = "ordinal", scale=None) -> float:
    """Krippendorff's alpha for a raters x items matrix (NaN = missing).

    ``scale`` optionally checks that every present rating lies in the given
    set of admissible values (e.g. ``range(1, 6)`` for a 5-point Likert).
    """
    r = np.asarray(ratings, dtype=float)
    if r.ndim != 2 or r.shape[0] < 2 or r.shape[1] < 1:
        raise InvalidArgument("ratings must be a raters x items matrix with at least 2 raters")
    if scale is not None:
        present = r[~np.isnan(r)]
        bad = set(present.tolist()) - {float(v) for v in scale}
        if bad:
            raise InvalidArgument(f"ratings outside scale: {sorted(bad)}")
    values, o = _coincidences(r)
    n_c = o.sum(axis=1)
    n = n_c.sum()
    if n < 2:
        raise UndefinedStatistic("fewer than two pairable ratings")
    d2 = _delta2(values, n_c, level)
    observed = np.sum(o * d2)
    expected = (np.sum(np.outer(n_c, n_c) * d2)) / (n - 1)
    if expected == 0.0:
        if observed == 0.0:
            return 1.0
        raise UndefinedStatistic("no variation in pairable ratings")
    return float(1.0 - observed / expected)


# --------------------------------------------------------------------------- #
# Welch's t-test
# --------------------------------------------------------------------------- #
class WelchResult(NamedTuple):
    t: float
    p: float
    df: float


def _betacf(a: float, b: float, x: float, eps: float = 1e-15, max_iter: int = 10000) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    if math.isnan(t):
        return float("nan")
    x = df / (df + t * t)
    return betainc_reg(df / 2.0, 0.5, x)


def welch_t(a, b) -> WelchResult:
    """Unequal-variance two-sample t-test with Welch-Satterthwaite dof."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if len(a) < 2 or len(b) < 2:
        raise InvalidArgument("welch_t needs at least two observations per sample")
    va = a.var(ddof=1) / len(a)
    vb = b.var(ddof=1) / len(b)
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0.0:
        if diff == 0.0:
            return WelchResult(0.0, 1.0, float(len(a) + len(b) - 2))
        raise UndefinedStatistic("both samples have zero variance")
    t = diff / math.sqrt(se2)
    df = se2**2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
    return WelchResult(float(t), float(t_two_sided_p(t, df)), float(df))
