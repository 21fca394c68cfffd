"""Goodness-of-fit and moment estimators with standard errors."""
from __future__ import annotations

import numpy as np
from scipy import stats as _st

from .errors import InsufficientSample

__all__ = ["ks_test", "ks_two_sample", "moment_ci", "jackknife_se", "MIN_SAMPLE"]

MIN_SAMPLE = 100


def _check(sample):
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < MIN_SAMPLE:
        raise InsufficientSample(f"need at least {MIN_SAMPLE} observations, got {x.size}")
    return x


def ks_test(sample, cdf):
    """One-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    x = _check(sample)
    res = _st.kstest(x, cdf, method="asymp")
    return float(res.statistic), float(res.pvalue)


def ks_two_sample(a, b):
    res = _st.ks_2samp(_check(a), _check(b), method="asymp")
    return float(res.statistic), float(res.pvalue)


def jackknife_se(x, stat):
    """Leave-one-out jackknife SE of ``stat`` (a function of a 1-d array)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    loo = np.array([stat(np.delete(x, i)) for i in range(n)])
    return float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def moment_ci(sample, order=1):
    """Raw moment E[X^order] and its jackknife SE.

    For a sample mean the leave-one-out values have a closed form, so the
    jackknife costs O(n) here rather than O(n²).
    """
    x = _check(sample) ** order
    n = x.size
    est = float(x.mean())
    loo = (x.sum() - x) / (n - 1)
    se = float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
    return est, se
