"""Correlation statistics for quality/performance analysis.

Pearson's r is computed directly from centered sums. The two-sided
p-value uses the exact t transform with n-2 degrees of freedom; the
Student-t CDF itself comes from scipy's regularized incomplete beta
(scipy.special.stdtr), which the test suite pins against a
high-precision quadrature oracle.
"""

from __future__ import annotations

import math
from typing import Sequence, Tuple

from scipy.special import stdtr


class StatsError(ValueError):
    pass


def student_t_cdf(t: float, df: int) -> float:
    """P(T <= t) for Student's t with df degrees of freedom."""
    if df < 1:
        raise StatsError(f"df must be >= 1, got {df}")
    return float(stdtr(df, t))


def two_sided_p(t: float, df: int) -> float:
    # Evaluate in the lower tail; 1 - cdf(|t|) loses precision for large t.
    return 2.0 * student_t_cdf(-abs(t), df)


def pearson(x: Sequence[float], y: Sequence[float]) -> Tuple[float, float]:
    """Sample Pearson coefficient and two-sided p-value.

    p comes from t = r * sqrt((n-2) / (1-r^2)) with df = n-2. Requires
    n >= 3 and nonzero variance on both sides.
    """
    n = len(x)
    if len(y) != n:
        raise StatsError(f"length mismatch: {n} vs {len(y)}")
    if n < 3:
        raise StatsError(f"need at least 3 points, got {n}")
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    dx = [xi - mx for xi in x]
    dy = [yi - my for yi in y]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0.0 or syy == 0.0:
        raise StatsError("zero variance: correlation undefined")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    # Rounding can push |r| a hair past 1 on collinear input.
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return r, two_sided_p(t, n - 2)
