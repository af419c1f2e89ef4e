import math

import numpy as np
import pytest
from scipy import integrate, special as sps

from holoisac.exceptions import DomainError
from holoisac.special import (EULER_GAMMA, LOG2E, SpectralStats, digamma, ergodic_kernel,
                              exp_e1_scaled, exp_integral_ei, exp_outage,
                              lower_incomplete_gamma, moschopoulos_deltas, upsilon,
                              weighted_expsum_cdf, weighted_expsum_pdf, zeta_ecr)


def test_ei_values():
    assert exp_integral_ei(-1.0) == pytest.approx(-0.219383934395520, abs=1e-12)
    assert abs(exp_integral_ei(-10.0)) < 5e-6
    for x in (-1e-8, -0.3, -7.9, -8.1, -40.0):
        assert exp_integral_ei(x) == pytest.approx(sps.expi(x), rel=1e-12)
    with pytest.raises(DomainError):
        exp_integral_ei(0.0)


def test_scaled_e1():
    for z in (1e-6, 0.5, 8.0, 100.0, 1e6):
        assert exp_e1_scaled(z) == pytest.approx(sps.exp1(z) * math.exp(z) if z < 700 else 1 / z, rel=1e-9)


def test_lower_gamma():
    s, x = 3.0, 1e-6
    assert lower_incomplete_gamma(s, x) / (x ** s / s) == pytest.approx(1.0, abs=1e-5)
    assert lower_incomplete_gamma(2.0, 1e6) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        lower_incomplete_gamma(0.0, 1.0)


def test_digamma():
    assert digamma(10) == pytest.approx(2.251752589066721, abs=1e-12)
    assert digamma(1) == pytest.approx(-EULER_GAMMA)
    with pytest.raises(DomainError):
        digamma(0)


def test_ergodic_kernel_matches_quadrature():
    for a in (0.1, 10.0, 1e4):
        ref, _ = integrate.quad(lambda g: math.log2(1 + a * g) * math.exp(-g), 0, np.inf)
        assert ergodic_kernel(a) == pytest.approx(ref, rel=1e-9)
    assert ergodic_kernel(0.0) == 0.0
    assert exp_outage(1.0) == pytest.approx(1 - math.exp(-1))


def test_deltas_two_eigs():
    d, k = moschopoulos_deltas([2.0, 1.0])
    assert d[0] == 1.0
    assert d[1] == pytest.approx(0.5)
    # weights sum to one after truncation
    w = 0.5 * d
    assert 1 - w.sum() < 1e-10 and k == len(d) - 1


def test_single_eig_is_exponential():
    st = SpectralStats([2.0])
    for x in (0.1, 1.0, 5.0):
        assert st.cdf(x) == pytest.approx(1 - math.exp(-x / 2), rel=1e-12)
        assert st.pdf(x) == pytest.approx(math.exp(-x / 2) / 2, rel=1e-12)


def test_equal_eigs_is_gamma():
    st = SpectralStats([1.0, 1.0])
    assert st.trunc_k == 0
    assert st.upsilon() == pytest.approx((1 - EULER_GAMMA) * LOG2E, rel=1e-12)
    assert st.cdf(1.5) == pytest.approx(sps.gammainc(2, 1.5), rel=1e-12)


def test_zeta_small_argument():
    assert zeta_ecr([3.0, 1.0], 1e-9) < 1e-7
    assert zeta_ecr([3.0, 1.0], 0.0) == 0.0


@pytest.mark.parametrize("eigs", [[5.0, 2.0, 0.5], list(np.geomspace(4, 0.2, 6))])
def test_series_vs_integral(eigs):
    ser = SpectralStats(eigs, method="series")
    itg = SpectralStats(eigs, method="integral")
    assert ser.uses_series and not itg.uses_series
    for x in (0.5, 3.0, 12.0):
        assert ser.cdf(x) == pytest.approx(itg.cdf(x), abs=1e-8)
        assert ser.pdf(x) == pytest.approx(itg.pdf(x), abs=1e-8)
    for a in (0.01, 1.0, 1e3):
        assert ser.zeta(a) == pytest.approx(itg.zeta(a), rel=1e-8)
    assert ser.upsilon() == pytest.approx(itg.upsilon(), rel=1e-8, abs=1e-10)


def test_upsilon_matches_sampling():
    eigs = [3.0, 1.0, 0.25]
    rng = np.random.default_rng(7)
    z = rng.standard_exponential((400000, 3)) @ np.array(eigs)
    mc = np.log2(z).mean()
    assert upsilon(eigs) == pytest.approx(mc, abs=5e-3)


def test_default_model_uses_series(model):
    st = SpectralStats(model.eigs)
    assert st.uses_series
    assert st.trunc_k <= st.predicted_k <= st.k_max
    assert 1 - st.weights.sum() < 1e-9


def test_functional_wrappers():
    st = SpectralStats([2.0, 1.0])
    assert weighted_expsum_cdf(st, 1.0) == st.cdf(1.0)
    assert weighted_expsum_pdf(st, 1.0) == st.pdf(1.0)


def test_domain_errors():
    with pytest.raises(DomainError):
        SpectralStats([])
    with pytest.raises(DomainError):
        SpectralStats([1.0, -1.0])
    with pytest.raises(DomainError):
        SpectralStats([1.0], method="bogus")
    with pytest.raises(DomainError):
        SpectralStats([1.0]).log_cdf(-1)
