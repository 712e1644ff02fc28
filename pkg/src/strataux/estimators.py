"""Point estimators of the population mean from a stratified sample.

Nine estimators are implemented, named by construction:

  mean                    plain stratified sample mean ybar_st
  ratio                   ybar_st * Xbar / xbar_st
  exp_ratio_x             ybar_st * exp((Xbar - xbar_st)/(Xbar + xbar_st))
  exp_ratio_xz            exponential ratio adjustment in both x and z
  exp_product_xz          exponential product adjustment in both x and z
  exp_ratio_x_product_z   ratio in x, product in z
  exp_product_x_ratio_z   product in x, ratio in z
  regression              ybar_st + b1*(Xbar - xbar_st) + b2*(Zbar - zbar_st)
  exp_regression          tuned exponential factors exp(m1*u), exp(m2*v)
                          on ybar_st plus the regression correction

The tuned estimator nests the others: m1 = m2 = 1 with zero slopes gives
exp_ratio_xz, m1 = m2 = -1 gives exp_product_xz, the mixed signs give the
mixed forms, and m1 = m2 = 0 gives the regression estimator.
"""
from __future__ import annotations

import math
from typing import Optional

from .data_model import (
    InputError,
    NumericalError,
    PopulationSummary,
    StratifiedSample,
)

ESTIMATOR_ORDER = (
    "mean",
    "ratio",
    "exp_ratio_x",
    "exp_ratio_xz",
    "exp_product_xz",
    "exp_ratio_x_product_z",
    "exp_product_x_ratio_z",
    "regression",
    "exp_regression",
)

_NEEDS_SLOPES = ("regression", "exp_regression")


def stratified_means(
    sample: StratifiedSample, pop: PopulationSummary
) -> tuple[float, float, float]:
    """Population-weighted sample means (ybar_st, xbar_st, zbar_st)."""
    sample.design.check_against(pop)
    w = pop.weights
    out = []
    for k in range(3):
        out.append(
            math.fsum(
                w[i] * (math.fsum(obs[k] for obs in group) / len(group))
                for i, group in enumerate(sample.observations)
            )
        )
    return out[0], out[1], out[2]


def sample_regression_coeffs(
    sample: StratifiedSample, pop: PopulationSummary
) -> tuple[float, float]:
    """Combined sample slopes (b1, b2), the plug-in analogues of B1, B2.

    b1 = sum_h W_h^2 f_h s_yxh / sum_h W_h^2 f_h s_xh^2 and b2 likewise
    with z, with sample variances/covariances on the n_h - 1 divisor.
    Strata sampled with a single unit carry no within-sample dispersion
    and are skipped. Under a full census every f_h is zero and the slopes
    are taken as 0 by convention (any value would do: the corrections they
    multiply are exactly zero there).
    """
    sample.design.check_against(pop)
    if all(n_h == s.N for s, n_h in zip(pop.strata, sample.design.n)):
        return 0.0, 0.0
    N = pop.N
    num1, den1, num2, den2 = [], [], [], []
    for s, n_h, group in zip(pop.strata, sample.design.n, sample.observations):
        f_h = 1.0 / n_h - 1.0 / s.N
        if n_h < 2:
            continue
        g = (s.N / N) ** 2 * f_h
        ys = [o[0] for o in group]
        xs = [o[1] for o in group]
        zs = [o[2] for o in group]
        my = math.fsum(ys) / n_h
        mx = math.fsum(xs) / n_h
        mz = math.fsum(zs) / n_h
        num1.append(g * math.fsum((y - my) * (x - mx) for y, x in zip(ys, xs)) / (n_h - 1))
        den1.append(g * math.fsum((x - mx) ** 2 for x in xs) / (n_h - 1))
        num2.append(g * math.fsum((y - my) * (z - mz) for y, z in zip(ys, zs)) / (n_h - 1))
        den2.append(g * math.fsum((z - mz) ** 2 for z in zs) / (n_h - 1))
    d1, d2 = math.fsum(den1), math.fsum(den2)
    if d1 == 0.0:
        raise NumericalError("sample slope b1 undefined: no x variation in the sample")
    if d2 == 0.0:
        raise NumericalError("sample slope b2 undefined: no z variation in the sample")
    return math.fsum(num1) / d1, math.fsum(num2) / d2


def _estimate_from_means(
    estimator: str,
    ybar_st: float,
    xbar_st: float,
    zbar_st: float,
    xbar: float,
    zbar: float,
    b1: float,
    b2: float,
    m1: float,
    m2: float,
) -> float:
    """Scalar estimator formulas; exponent overflow comes back as nan."""
    if estimator == "mean":
        return ybar_st
    if estimator == "ratio":
        if xbar_st == 0.0:
            raise NumericalError("ratio estimator undefined: sample x mean is zero")
        return ybar_st * xbar / xbar_st
    if estimator == "regression":
        return ybar_st + b1 * (xbar - xbar_st) + b2 * (zbar - zbar_st)

    if xbar + xbar_st == 0.0:
        raise NumericalError("exponential adjustment undefined: Xbar + xbar_st is zero")
    if estimator not in ("exp_ratio_x",) and zbar + zbar_st == 0.0:
        raise NumericalError("exponential adjustment undefined: Zbar + zbar_st is zero")
    u = (xbar - xbar_st) / (xbar + xbar_st)
    v = (zbar - zbar_st) / (zbar + zbar_st) if estimator != "exp_ratio_x" else 0.0
    try:
        if estimator == "exp_ratio_x":
            return ybar_st * math.exp(u)
        if estimator == "exp_ratio_xz":
            return ybar_st * math.exp(u) * math.exp(v)
        if estimator == "exp_product_xz":
            return ybar_st * math.exp(-u) * math.exp(-v)
        if estimator == "exp_ratio_x_product_z":
            return ybar_st * math.exp(u) * math.exp(-v)
        if estimator == "exp_product_x_ratio_z":
            return ybar_st * math.exp(-u) * math.exp(v)
        if estimator == "exp_regression":
            return (
                ybar_st * math.exp(m1 * u) * math.exp(m2 * v)
                + b1 * (xbar - xbar_st)
                + b2 * (zbar - zbar_st)
            )
    except OverflowError:
        return math.nan
    raise InputError(f"unknown estimator {estimator!r}")


def point_estimate(
    estimator: str,
    sample: StratifiedSample,
    pop: PopulationSummary,
    *,
    m1: Optional[float] = None,
    m2: Optional[float] = None,
    b1: Optional[float] = None,
    b2: Optional[float] = None,
) -> float:
    """Evaluate one estimator on a drawn sample.

    m1, m2 apply to exp_regression only (required there, finite). b1, b2
    override the sample slopes for the two slope-bearing estimators; by
    default the slopes come from sample_regression_coeffs.
    """
    if estimator not in ESTIMATOR_ORDER:
        raise InputError(f"unknown estimator {estimator!r}")
    if estimator == "exp_regression":
        if m1 is None or m2 is None or not (math.isfinite(m1) and math.isfinite(m2)):
            raise InputError("exp_regression requires finite m1 and m2")
    elif m1 is not None or m2 is not None:
        raise InputError(f"m1/m2 are not parameters of {estimator!r}")
    if estimator not in _NEEDS_SLOPES and (b1 is not None or b2 is not None):
        raise InputError(f"b1/b2 are not parameters of {estimator!r}")

    ybar_st, xbar_st, zbar_st = stratified_means(sample, pop)
    if estimator in _NEEDS_SLOPES and (b1 is None or b2 is None):
        sb1, sb2 = sample_regression_coeffs(sample, pop)
        b1 = sb1 if b1 is None else b1
        b2 = sb2 if b2 is None else b2

    value = _estimate_from_means(
        estimator, ybar_st, xbar_st, zbar_st, pop.xbar, pop.zbar,
        b1 if b1 is not None else 0.0,
        b2 if b2 is not None else 0.0,
        m1 if m1 is not None else 0.0,
        m2 if m2 is not None else 0.0,
    )
    if not math.isfinite(value):
        raise NumericalError(f"estimator {estimator!r} produced a non-finite value")
    return value
