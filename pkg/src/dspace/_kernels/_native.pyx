# cython: boundscheck=False, wraparound=False, cdivision=True
"""Native kernels: noncentral chi-square CDF/quantile and batched TI widths.

Algorithm matches the pure backend: Poisson(ncp/2)-weighted series of central
chi-square CDFs (regularized lower incomplete gamma, evaluated by series or
continued fraction), quantile by bracketed bisection. The series is summed
outward from the Poisson mode so large noncentralities stay stable and cheap.
"""

import numpy as np

from libc.math cimport exp, fabs, lgamma, log, sqrt

BACKEND_NAME = "native"

MAX_SERIES_TERMS = 100000

cdef double SERIES_TOL = 1e-15
cdef double IGAM_EPS = 1e-16
cdef int IGAM_ITMAX = 500
cdef int C_MAX_SERIES_TERMS = 100000
cdef double BISECT_XTOL = 1e-9
cdef double BISECT_PTOL = 1e-10
cdef int MAX_BISECT = 200


class KernelConvergenceError(RuntimeError):
    """Series or root find did not converge within the iteration cap."""


cdef double _igam_series(double a, double x) noexcept nogil:
    # lower regularized incomplete gamma by power series, for x < a + 1
    cdef double ap = a
    cdef double s = 1.0 / a
    cdef double d = s
    cdef int n
    for n in range(IGAM_ITMAX):
        ap += 1.0
        d *= x / ap
        s += d
        if fabs(d) < fabs(s) * IGAM_EPS:
            break
    return s * exp(-x + a * log(x) - lgamma(a))


cdef double _igam_cf(double a, double x) noexcept nogil:
    # upper regularized incomplete gamma by Lentz continued fraction, x >= a + 1
    cdef double tiny = 1e-300
    cdef double b = x + 1.0 - a
    cdef double c = 1.0 / tiny
    cdef double d = 1.0 / b
    cdef double h = d
    cdef double an, delta
    cdef int i
    for i in range(1, IGAM_ITMAX):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if fabs(d) < tiny:
            d = tiny
        c = b + an / c
        if fabs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < IGAM_EPS:
            break
    return h * exp(-x + a * log(x) - lgamma(a))


cdef double _igam_lower(double a, double x) noexcept nogil:
    if x <= 0.0:
        return 0.0
    if x < a + 1.0:
        return _igam_series(a, x)
    return 1.0 - _igam_cf(a, x)


cdef inline double _chi2_term(double a, double hx) noexcept nogil:
    # P(a, x) - P(a + 1, x) = x^a e^{-x} / Gamma(a + 1)
    return exp(a * log(hx) - hx - lgamma(a + 1.0))


cdef int _ncx2_cdf_scalar(double x, double df, double ncp, double* out) noexcept nogil:
    cdef double lam = ncp / 2.0
    cdef double hx, half_df, w_up, w_dn, g_up, g_dn, acc, cum_w
    cdef long j0, j_up, j_dn
    cdef int steps

    if x <= 0.0:
        out[0] = 0.0
        return 0
    hx = x / 2.0
    half_df = df / 2.0
    if lam <= 0.0:
        out[0] = _igam_lower(half_df, hx)
        return 0

    # start at the Poisson mode and sweep both directions
    j0 = <long>lam
    w_up = exp(-lam + j0 * log(lam) - lgamma(j0 + 1.0))
    g_up = _igam_lower(half_df + j0, hx)
    acc = w_up * g_up
    cum_w = w_up
    w_dn = w_up
    g_dn = g_up
    j_up = j0
    j_dn = j0
    for steps in range(C_MAX_SERIES_TERMS):
        if 1.0 - cum_w <= SERIES_TOL:
            break
        # once the up-sweep weight underflows past the mode and the down
        # sweep is exhausted, the remaining Poisson mass cannot matter
        if j_up > lam and w_up < 1e-17 and (j_dn == 0 or w_dn < 1e-17):
            break
        j_up += 1
        w_up *= lam / j_up
        g_up -= _chi2_term(half_df + j_up - 1.0, hx)
        if g_up < 0.0:
            g_up = 0.0
        acc += w_up * g_up
        cum_w += w_up
        if j_dn > 0:
            w_dn *= j_dn / lam
            j_dn -= 1
            g_dn += _chi2_term(half_df + j_dn, hx)
            if g_dn > 1.0:
                g_dn = 1.0
            acc += w_dn * g_dn
            cum_w += w_dn
    else:
        return -1
    out[0] = acc if acc < 1.0 else 1.0
    return 0


cdef int _ncx2_ppf_scalar(double prob, double df, double ncp, double* out) noexcept nogil:
    cdef double lo = 0.0
    cdef double hi = df + ncp + 40.0 * sqrt(2.0 * (df + 2.0 * ncp)) + 40.0
    cdef double mid = hi / 2.0
    cdef double c
    cdef int i, rc
    for i in range(MAX_BISECT):
        mid = (lo + hi) / 2.0
        rc = _ncx2_cdf_scalar(mid, df, ncp, &c)
        if rc != 0:
            return rc
        if hi - lo <= BISECT_XTOL and fabs(c - prob) <= BISECT_PTOL:
            out[0] = mid
            return 0
        if c >= prob:
            hi = mid
        else:
            lo = mid
    out[0] = mid
    return -2


def ncx2_cdf(x, double df, ncp):
    """CDF of the noncentral chi-square distribution (scalars or arrays)."""
    cdef bint scalar = np.isscalar(x) and np.isscalar(ncp)
    x_arr, ncp_arr = np.broadcast_arrays(
        np.atleast_1d(np.asarray(x, dtype=np.float64)),
        np.atleast_1d(np.asarray(ncp, dtype=np.float64)),
    )
    shape = x_arr.shape
    cdef const double[::1] xv = np.ascontiguousarray(x_arr).ravel()
    cdef const double[::1] nv = np.ascontiguousarray(ncp_arr).ravel()
    out = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = xv.shape[0]
    cdef int rc = 0
    cdef double bad_ncp = 0.0
    with nogil:
        for i in range(n):
            if _ncx2_cdf_scalar(xv[i], df, nv[i], &ov[i]) != 0:
                rc = -1
                bad_ncp = nv[i]
                break
    if rc != 0:
        raise KernelConvergenceError(
            f"noncentral chi-square CDF series did not converge within "
            f"{MAX_SERIES_TERMS} terms (ncp={bad_ncp:g})"
        )
    if scalar:
        return float(out[0])
    return out.reshape(shape)


def ncx2_ppf(double prob, double df, ncp):
    """Quantile of the noncentral chi-square distribution.

    Bracketed bisection on [0, df + ncp + 40*sqrt(2*(df + 2*ncp)) + 40],
    run until the bracket is narrower than 1e-9 and the CDF at the midpoint
    is within 1e-10 of `prob`.
    """
    cdef bint scalar = np.isscalar(ncp)
    ncp_arr = np.atleast_1d(np.asarray(ncp, dtype=np.float64)).ravel()
    cdef const double[::1] nv = np.ascontiguousarray(ncp_arr)
    out = np.empty(nv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = nv.shape[0]
    cdef int rc = 0
    cdef double bad_ncp = 0.0
    with nogil:
        for i in range(n):
            rc = _ncx2_ppf_scalar(prob, df, nv[i], &ov[i])
            if rc != 0:
                bad_ncp = nv[i]
                break
    if rc != 0:
        raise KernelConvergenceError(
            f"noncentral chi-square quantile did not converge "
            f"(prob={prob:g}, df={df:g}, ncp={bad_ncp:g}, code={rc})"
        )
    if scalar:
        return float(out[0])
    return out


def chi2_ppf(double prob, double df):
    """Central chi-square quantile via the same machinery (ncp = 0)."""
    return float(ncx2_ppf(prob, df, 0.0))


def ti_halfwidths(se2, double sigma2, double df_resid, double alpha, double psi):
    """Tolerance-interval half-widths for a batch of prediction variances."""
    cdef bint scalar = np.isscalar(se2)
    se2_arr = np.atleast_1d(np.asarray(se2, dtype=np.float64)).ravel()
    cdef const double[::1] sv = np.ascontiguousarray(se2_arr)
    out = np.empty(sv.shape[0], dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = sv.shape[0]
    cdef double q_den, q_num, scale
    cdef int rc = 0
    cdef double bad_ncp = 0.0
    q_den = chi2_ppf(alpha, df_resid)
    scale = sigma2 * df_resid / q_den
    with nogil:
        for i in range(n):
            rc = _ncx2_ppf_scalar(psi, 1.0, sv[i] / sigma2, &q_num)
            if rc != 0:
                bad_ncp = sv[i] / sigma2
                break
            ov[i] = sqrt(scale * q_num)
    if rc != 0:
        raise KernelConvergenceError(
            f"tolerance width evaluation did not converge (ncp={bad_ncp:g})"
        )
    if scalar:
        return float(out[0])
    return out.reshape(np.shape(se2))
