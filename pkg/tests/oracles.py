"""Independent reference implementations used as test oracles.

These deliberately avoid the library's code paths: the autocorrelation
oracle is a literal double loop over the defining expectation, and the
Rician power CDF comes from the noncentral chi-square law.
"""

import math

import numpy as np
from scipy import stats


def brute_force_autocorr(amplitudes_1d, lag):
    """Literal double-loop evaluation of the normalized covariance between
    an amplitude sequence and its lag-shifted copy, with means and variances
    over the overlapping window. Returns NaN on zero variance."""
    n = len(amplitudes_1d) - lag
    mean_x = 0.0
    for l in range(n):
        mean_x += amplitudes_1d[l]
    mean_x /= n
    mean_y = 0.0
    for l in range(n):
        mean_y += amplitudes_1d[l + lag]
    mean_y /= n
    num = 0.0
    for l in range(n):
        num += (amplitudes_1d[l] - mean_x) * (amplitudes_1d[l + lag] - mean_y)
    var_x = 0.0
    for l in range(n):
        var_x += (amplitudes_1d[l] - mean_x) * (amplitudes_1d[l] - mean_x)
    var_y = 0.0
    for l in range(n):
        var_y += (amplitudes_1d[l + lag] - mean_y) * (amplitudes_1d[l + lag] - mean_y)
    if var_x == 0.0 or var_y == 0.0:
        return math.nan
    return num / math.sqrt(var_x * var_y)


def rician_power_cdf(x, k_linear):
    """CDF of |h|^2 for h = sqrt(K/(K+1))e^{j psi} + sqrt(1/(K+1)) CN(0,1).

    2(K+1)|h|^2 follows a noncentral chi-square with 2 degrees of freedom
    and noncentrality 2K.
    """
    x = np.asarray(x, dtype=float)
    return stats.ncx2.cdf(2.0 * (k_linear + 1.0) * x, df=2, nc=2.0 * k_linear)


def exponential_power_cdf(x):
    """CDF of |h|^2 for unit-power Rayleigh fading (exponential law)."""
    x = np.asarray(x, dtype=float)
    return 1.0 - np.exp(-np.clip(x, 0.0, None))


def expected_autocorr(a, b, c, dr):
    """Independent evaluation of the exponential model a*e^(-b*dr) - c."""
    return a * math.exp(-b * dr) - c
