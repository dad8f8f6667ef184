import math

from hypothesis import given, settings, strategies as st
import mpmath
import numpy as np
import pytest

from spectral_vgp.errors import ConfigError
from spectral_vgp.spectral_kernel import ExponentialExperimentSpectrum, PolynomialSpectrum, rescaling_tau
from spectral_vgp.synthetic_data import f0_oversmooth, f0_paper, f0_power, zero_truth
from spectral_vgp.theory import alternative_terms, effective_dim, nu, predicted_rate, rate_terms


class TestNu:
    def test_examples(self):
        assert nu(10, 0.0, 0.01) == 0.0
        assert nu(4, 0.25, 1.0) == 0.5
        assert nu(2500, 50.0**-2, 0.01) == pytest.approx(1 / 1.01, rel=1e-15)
        assert nu(2500, 50.0**-2, 0.01) == pytest.approx(0.990099, abs=1e-6)

    @given(st.integers(1, 10**6), st.floats(1e-12, 10.0), st.floats(1e-4, 10.0))
    def test_complement_identity(self, n, lam, s2):
        v = nu(n, lam, s2)
        assert 0 <= v <= 1
        assert 1 - v == pytest.approx(s2 * v / (n * lam), rel=1e-12, abs=1e-15)


class TestEffectiveDim:
    def test_linear_scan(self):
        s = PolynomialSpectrum(0.5)
        for n in (1, 2, 7, 100, 2500, 12345):
            ref = max((j for j in range(1, 20000) if n * s.eigenvalue(j) >= 1), default=0)
            assert effective_dim(s, n) == ref
        assert effective_dim(s, 100) == 10

    def test_paper_threshold(self):
        assert effective_dim(PolynomialSpectrum(0.5), 2500) == 50

    def test_empty(self):
        assert effective_dim(ExponentialExperimentSpectrum(0.5), 1) == 0

    @given(st.integers(1, 10**7), st.floats(0.2, 3.0))
    def test_consistency(self, n, alpha):
        s = PolynomialSpectrum(alpha)
        J = effective_dim(s, n)
        assert J >= 1
        assert n * s.eigenvalue(J) >= 1 > n * s.eigenvalue(J + 1)


class TestRateTerms:
    def test_zero_truth(self):
        t = rate_terms(PolynomialSpectrum(0.5), zero_truth(100), 500, 22, 0.01)
        assert t.B_n == 0
        assert t.R_n == pytest.approx(t.W_n / t.V_n) and t.R_n <= 1

    def test_empty_head(self):
        s, f = PolynomialSpectrum(0.5), f0_paper(0.5)
        t = rate_terms(s, f, 500, 0, 0.01)
        assert t.W_n == 0
        assert t.V_n == pytest.approx(s.total())
        assert t.B_n == pytest.approx(f.l2_norm() ** 2 + f.decay.weighted_tail(f.n_terms), rel=1e-12)

    def test_direct_sums(self):
        s, f = PolynomialSpectrum(0.5), f0_power(0.7, 1000)
        n, m = 300, 12
        lam = np.array([j**-2.0 for j in range(1, m + 1)])
        v = n * lam / (0.04 + n * lam)
        c = np.array([j ** -1.2 for j in range(1, 1001)])
        t = rate_terms(s, f, n, m, 0.04)
        # the truth continues beyond its stored terms; mpmath supplies that remainder
        beyond = float(mpmath.zeta(2.4, 1001))
        assert t.B_n == pytest.approx(np.sum((1 - v) ** 2 * c[:m] ** 2) + np.sum(c[m:] ** 2) + beyond, rel=1e-10)
        assert t.W_n == pytest.approx(np.sum(v**2) / n)
        assert t.V_n == pytest.approx(np.sum(v) / n + math.pi**2 / 6 - np.sum(lam), rel=1e-10)

    def test_truth_too_short(self):
        with pytest.raises(ConfigError):
            rate_terms(PolynomialSpectrum(0.5), f0_power(1.0, 10), 100, 20, 0.01)

    @pytest.mark.parametrize("n", [100, 1000, 10000])
    @pytest.mark.parametrize("s2", [0.01, 1.0])
    def test_alternative_forms(self, n, s2):
        s, f = PolynomialSpectrum(0.5), f0_paper(0.5)
        J = effective_dim(s, n)
        for m in (J, J // 2):
            direct = rate_terms(s, f, n, m, s2)
            alt = alternative_terms(s, f, n, m)
            for a, b in ((direct.B_n, alt.B_n), (direct.W_n, alt.W_n), (direct.V_n, alt.V_n)):
                assert 1 / 4 <= a / b <= 4

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 10**5), st.integers(0, 200), st.floats(0.3, 2.0), st.floats(1e-3, 2.0))
    def test_invariants(self, n, m, alpha, s2):
        t = rate_terms(PolynomialSpectrum(alpha), f0_power(0.6, 400), n, m, s2)
        assert np.all((0 <= t.nu) & (t.nu <= 1)) and np.all(np.diff(t.nu) <= 0)
        assert t.W_n <= t.V_n
        assert t.R_n >= t.B_n / t.V_n


class TestTrichotomy:
    NS = [100, 300, 1000, 3000, 10000, 30000, 100000]

    def _r(self, spectrum, truth, m_of):
        return [rate_terms(spectrum, truth, n, m_of(n), 0.01).R_n for n in self.NS]

    def test_matched_bounded(self):
        s = PolynomialSpectrum(0.5)
        r = self._r(s, f0_paper(0.5, 200000), lambda n: effective_dim(s, n))
        assert max(r) / min(r) < 1.2

    def test_oversmoothed_grows(self):
        s = PolynomialSpectrum(1.5)
        r = self._r(s, f0_oversmooth(1.0, 1.5, 0.5, n_terms=200000), lambda n: effective_dim(s, n))
        tail = r[self.NS.index(1000):]
        assert all(a < b for a, b in zip(tail, tail[1:]))

    def test_small_m_shrinks(self):
        r = self._r(PolynomialSpectrum(1.0), f0_power(1.5, 200000), lambda n: math.ceil(n**0.3))
        slope = np.polyfit(np.log(self.NS), np.log(r), 1)[0]
        assert slope < 0 and r[-1] < 0.7 * r[0]

    def test_exponential_spread_scaling(self):
        # V_n n^{1/2} stays in a fixed band for the rescaled exponential prior (alpha = 0.5)
        vals = []
        for n in (200, 800, 3200, 12800):
            s = ExponentialExperimentSpectrum(rescaling_tau(n, 0.5))
            vals.append(rate_terms(s, f0_paper(0.5), n, math.ceil(math.sqrt(n)), 0.01).V_n * math.sqrt(n))
        assert max(vals) / min(vals) < 4


class TestPredictedRate:
    def test_matched(self):
        r = predicted_rate("polynomial", 0.5, 0.5)
        assert r.exponent == -0.25 and r.regime == "optimal"

    def test_oversmoothed(self):
        r = predicted_rate("polynomial", 1.5, 0.5)
        assert r.exponent == -0.125 and r.regime == "oversmoothed"

    def test_undersmoothed(self):
        assert predicted_rate("exponential_experiment", 0.5, 1.0).regime == "undersmoothed"

    @given(st.floats(0.1, 5), st.floats(0.1, 5))
    def test_insufficient_m(self, alpha, beta):
        r = 0.99 / (1 + 2 * alpha)
        assert predicted_rate("polynomial", alpha, beta, r=r).regime == "insufficient-m"

    def test_bad_inputs(self):
        with pytest.raises(ConfigError):
            predicted_rate("polynomial", 0.0, 0.5)
        with pytest.raises(ConfigError):
            predicted_rate("matern", 0.5, 0.5)
