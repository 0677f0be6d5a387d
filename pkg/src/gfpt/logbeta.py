"""Log multivariate beta ratios with the degenerate zero-concentration rule.

A coordinate with concentration exactly 0 is a point mass that never
receives observations; it is dropped from the multivariate beta (a
one-sided beta with a zero argument equals 1, so dropped coordinates
contribute nothing).
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

__all__ = ["log_beta_ratio_rows", "log_mv_beta"]


def log_mv_beta(alpha_rows: np.ndarray) -> np.ndarray:
    """Row-wise log multivariate beta, dropping zero coordinates."""
    alpha_rows = np.asarray(alpha_rows, dtype=np.float64)
    mask = alpha_rows > 0
    safe = np.where(mask, alpha_rows, 1.0)
    per = np.where(mask, gammaln(safe), 0.0).sum(axis=1)
    return per - gammaln((alpha_rows * mask).sum(axis=1))


def log_beta_ratio_rows(alpha_rows, count_rows) -> np.ndarray:
    """Row-wise log [B(alpha + counts) / B(alpha)] with zero-drop.

    Raises if a zero-concentration coordinate carries a positive count,
    which has prior probability zero.
    """
    alpha_rows = np.asarray(alpha_rows, dtype=np.float64)
    count_rows = np.asarray(count_rows, dtype=np.float64)
    mask = alpha_rows > 0
    if np.any(~mask & (count_rows > 0)):
        raise DomainError(
            "observations fell in a branch with zero prior concentration"
        )
    safe = np.where(mask, alpha_rows, 1.0)
    per = np.where(mask, gammaln(safe + count_rows) - gammaln(safe), 0.0)
    asum = (alpha_rows * mask).sum(axis=1)
    csum = (count_rows * mask).sum(axis=1)
    return per.sum(axis=1) - (gammaln(asum + csum) - gammaln(asum))
