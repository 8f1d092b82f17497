"""Noncentral chi-square kernel tests against independent references."""

import numpy as np
import pytest
from scipy.stats import chi2, ncx2

from dspace import _kernels
from dspace.tolerance import noncentral_chi2_cdf, noncentral_chi2_quantile


def backends():
    out = [_kernels.get_backend("pure")]
    try:
        out.append(_kernels.get_backend("native"))
    except ImportError:
        pass
    return out


@pytest.mark.parametrize("be", backends(), ids=lambda b: b.BACKEND_NAME)
def test_central_case_matches_reference(be):
    # reference = scipy's central chi-square quantile (independent oracle)
    for df in range(1, 31):
        for prob in (0.01, 0.05, 0.5, 0.95, 0.99):
            q = be.ncx2_ppf(prob, float(df), 0.0)
            ref = chi2.ppf(prob, df)
            assert q == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("be", backends(), ids=lambda b: b.BACKEND_NAME)
def test_noncentral_quantile_matches_scipy(be):
    for prob in (0.05, 0.5, 0.9, 0.99):
        for df in (1.0, 3.0, 19.0):
            for ncp in (0.01, 0.5, 2.0, 25.0):
                assert be.ncx2_ppf(prob, df, ncp) == pytest.approx(
                    ncx2.ppf(prob, df, ncp), rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("be", backends(), ids=lambda b: b.BACKEND_NAME)
def test_cdf_round_trip(be):
    # self-consistency: CDF(quantile(p)) == p via the series implementation
    q = be.ncx2_ppf(0.9, 3.0, 1.5)
    assert be.ncx2_cdf(q, 3.0, 1.5) == pytest.approx(0.9, abs=1e-8)
    for prob in (0.01, 0.3, 0.97):
        for df, ncp in ((1.0, 0.05), (7.0, 4.0), (19.0, 0.0)):
            q = be.ncx2_ppf(prob, df, ncp)
            assert be.ncx2_cdf(q, df, ncp) == pytest.approx(prob, abs=1e-8)


def test_quantile_strictly_increasing_in_ncp():
    q0 = noncentral_chi2_quantile(0.95, 1, 0.0)
    q2 = noncentral_chi2_quantile(0.95, 1, 2.0)
    assert q0 == pytest.approx(3.8415, abs=1e-3)  # central chi2 table value
    assert q2 > q0


def test_quantile_domain_validation():
    from dspace.errors import ContractError

    with pytest.raises(ContractError):
        noncentral_chi2_quantile(0.0, 1, 1.0)
    with pytest.raises(ContractError):
        noncentral_chi2_quantile(0.5, 0, 1.0)
    with pytest.raises(ContractError):
        noncentral_chi2_quantile(0.5, 1, -1.0)


def test_cdf_public_wrapper_batch():
    x = np.array([0.5, 1.0, 4.0])
    vals = noncentral_chi2_cdf(x, 2, 1.0)
    assert vals.shape == (3,)
    assert np.all(np.diff(vals) > 0)


def test_backends_agree():
    bes = backends()
    if len(bes) < 2:
        pytest.skip("native backend not built")
    pure, native = bes
    ncp = np.linspace(0.0, 30.0, 40)
    hp = pure.ti_halfwidths(ncp + 0.01, 1.0, 12.0, 0.05, 0.99)
    hn = native.ti_halfwidths(ncp + 0.01, 1.0, 12.0, 0.05, 0.99)
    np.testing.assert_allclose(hp, hn, atol=1e-8)


@pytest.mark.parametrize("be", backends(), ids=lambda b: b.BACKEND_NAME)
def test_ti_halfwidths_formula(be):
    # direct evaluation of the width formula (independent scipy path)
    se2, sigma2, df = 0.05, 1.0, 19.0
    hw = be.ti_halfwidths(np.array([se2]), sigma2, df, 0.05, 0.99)[0]
    ref = np.sqrt(sigma2 * df * ncx2.ppf(0.99, 1, se2 / sigma2) / chi2.ppf(0.05, df))
    assert hw == pytest.approx(ref, rel=1e-7)
