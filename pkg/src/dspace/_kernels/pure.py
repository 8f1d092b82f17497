"""Pure NumPy backend for the noncentral chi-square kernels.

Same algorithm as the native extension: the noncentral chi-square CDF is a
Poisson(ncp/2)-weighted series of central chi-square CDFs (regularized lower
incomplete gamma), and quantiles are found by bracketed bisection on
[0, df + ncp + 40*sqrt(2*(df + 2*ncp)) + 40].

Everything here is vectorized over the noncentrality parameter, which is the
axis that varies point-by-point when tolerance intervals are evaluated on a
batch of prediction points.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammainc, gammaln

BACKEND_NAME = "pure"

_MAX_SERIES_TERMS = 100_000
_SERIES_TOL = 1e-15
_BISECT_XTOL = 1e-9
_BISECT_PTOL = 1e-10
_MAX_BISECT = 200


class KernelConvergenceError(RuntimeError):
    """Series or root find did not converge within the iteration cap."""


def ncx2_cdf(x, df: float, ncp):
    """CDF of the noncentral chi-square distribution.

    `x` and `ncp` may be scalars or arrays (broadcast together); `df` is a
    positive scalar.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    ncp_arr = np.atleast_1d(np.asarray(ncp, dtype=float))
    x_arr, ncp_arr = np.broadcast_arrays(x_arr, ncp_arr)
    out = _ncx2_cdf_impl(x_arr.ravel(), float(df), ncp_arr.ravel())
    out = out.reshape(x_arr.shape)
    if np.isscalar(x) and np.isscalar(ncp):
        return float(out.reshape(-1)[0])
    return out


def _ncx2_cdf_impl(x: np.ndarray, df: float, ncp: np.ndarray) -> np.ndarray:
    lam = ncp / 2.0
    half_x = np.where(x > 0.0, x / 2.0, 0.0)
    out = np.zeros_like(x)
    pos = x > 0.0
    if not np.any(pos):
        return out

    hx = half_x[pos]
    lm = lam[pos]
    acc = np.zeros_like(hx)
    cum_w = np.zeros_like(hx)
    log_lm = np.where(lm > 0.0, np.log(np.where(lm > 0.0, lm, 1.0)), 0.0)
    for j in range(_MAX_SERIES_TERMS):
        # log Poisson weight; lam == 0 contributes only the j == 0 term
        with np.errstate(divide="ignore"):
            log_w = -lm + j * log_lm - gammaln(j + 1.0)
        w = np.where((lm == 0.0) & (j > 0), 0.0, np.exp(log_w))
        # an element is done when its Poisson mass is exhausted, or when the
        # weights past the mode have underflowed (float rounding can leave
        # the accumulated mass a few ulp short of 1)
        done = ((1.0 - cum_w) <= _SERIES_TOL) | ((j > lm) & (w < 1e-17))
        if np.all(done):
            break
        term = w * gammainc(df / 2.0 + j, hx)
        acc = np.where(done, acc, acc + term)
        cum_w = cum_w + np.where(done, 0.0, w)
    else:
        raise KernelConvergenceError(
            f"noncentral chi-square CDF series did not converge within "
            f"{_MAX_SERIES_TERMS} terms (max ncp={float(np.max(ncp)):g})"
        )
    out[pos] = np.clip(acc, 0.0, 1.0)
    return out


def _bracket_hi(df: float, ncp: np.ndarray) -> np.ndarray:
    return df + ncp + 40.0 * np.sqrt(2.0 * (df + 2.0 * ncp)) + 40.0


def ncx2_ppf(prob: float, df: float, ncp):
    """Quantile of the noncentral chi-square distribution.

    `prob` and `df` are scalars, `ncp` a scalar or array. Bisection runs until
    the bracket is narrower than 1e-9 and the CDF at the midpoint is within
    1e-10 of `prob`.
    """
    scalar = np.isscalar(ncp)
    ncp_arr = np.atleast_1d(np.asarray(ncp, dtype=float)).ravel()
    lo = np.zeros_like(ncp_arr)
    hi = _bracket_hi(df, ncp_arr)
    mid = (lo + hi) / 2.0
    for _ in range(_MAX_BISECT):
        mid = (lo + hi) / 2.0
        c = _ncx2_cdf_impl(mid, df, ncp_arr)
        done = ((hi - lo) <= _BISECT_XTOL) & (np.abs(c - prob) <= _BISECT_PTOL)
        if np.all(done):
            break
        above = c >= prob
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    else:
        width = float(np.max(hi - lo))
        raise KernelConvergenceError(
            f"noncentral chi-square quantile bisection did not converge "
            f"(prob={prob:g}, df={df:g}, residual bracket width {width:g})"
        )
    if scalar:
        return float(mid[0])
    return mid


def chi2_ppf(prob: float, df: float) -> float:
    """Central chi-square quantile via the same machinery (ncp = 0)."""
    return float(ncx2_ppf(prob, df, 0.0))


def ti_halfwidths(se2, sigma2: float, df_resid: float, alpha: float, psi: float):
    """Tolerance-interval half-widths for a batch of prediction variances.

    se2 is the squared standard error of the mean prediction at each point;
    sigma2 the residual variance; df_resid the residual degrees of freedom.
    Returns sigma * sqrt(df_resid * q_psi(ncp=se2/sigma2) / q_alpha).
    """
    se2_arr = np.atleast_1d(np.asarray(se2, dtype=float)).ravel()
    ncp = se2_arr / sigma2
    q_num = ncx2_ppf(psi, 1.0, ncp)
    q_den = chi2_ppf(alpha, df_resid)
    hw = np.sqrt(sigma2 * df_resid * np.atleast_1d(q_num) / q_den)
    if np.isscalar(se2):
        return float(hw[0])
    return hw.reshape(np.shape(se2))
