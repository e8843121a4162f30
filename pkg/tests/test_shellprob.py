import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gaussrd import (
    CodebookKind, DistortionSetup, g_lower, g_upper, psi_spherical, r_iid_star, r_sp, upsilon_bahadur_rao,
    upsilon_iid,
)
from gaussrd.errors import DomainError, PreconditionError
from gaussrd.shellprob import ShellMethod, log_psi_spherical, log_upsilon_iid

SETUP = DistortionSetup(1.0, 0.25)


def mp_psi(setup, n, z):
    """Upper tail of the first coordinate of a uniform point on the sphere, by direct integration."""
    mp.mp.dps = 40
    u0 = (mp.mpf(z) + setup.p_y - setup.D) / (2 * mp.sqrt(mp.mpf(z) * setup.p_y))
    if u0 >= 1:
        return mp.mpf(0)
    k = mp.mpf(n - 3) / 2
    dens = lambda u: (1 - u * u) ** k
    norm = mp.beta(mp.mpf(1) / 2, mp.mpf(n - 1) / 2)
    lo = max(u0, -1)
    # the integrand is sharply peaked near lo for large n; subdivide so quad resolves it
    pts = [lo + (1 - lo) * mp.mpf(j) / 16 for j in range(17)]
    return mp.quad(dens, pts) / norm


def mc_cover(setup, n, z, kind, samples, seed):
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((samples, n))
    if kind is CodebookKind.SPHERICAL:
        y *= math.sqrt(n * setup.p_y) / np.linalg.norm(y, axis=1, keepdims=True)
    else:
        y *= math.sqrt(setup.p_y)
    d = (np.sum(y * y, axis=1) - 2.0 * math.sqrt(n * z) * y[:, 0] + n * z) / n
    return np.count_nonzero(d <= setup.D) / samples


class TestSpherical:
    def test_zero_outside_shell(self):
        assert psi_spherical(SETUP, 10, 2.0).value == 0.0
        assert psi_spherical(SETUP, 10, math.nextafter(SETUP.r2_sq, 3.0)).value == 0.0
        assert psi_spherical(SETUP, 10, 0.5 * SETUP.r1_sq).value == 0.0

    @pytest.mark.parametrize("n", [2, 3, 10, 101, 5000])
    def test_symmetric_threshold_gives_half(self, n):
        assert psi_spherical(DistortionSetup(1.0, 0.75), n, 0.5).value == pytest.approx(0.5, abs=1e-13)

    def test_full_cover_below_inner_radius(self):
        # r1 < 0 here, so small-power blocks are always covered
        st_ = DistortionSetup(1.0, 0.9)
        assert psi_spherical(st_, 20, 0.001).value == 1.0

    @pytest.mark.parametrize("n,z", [(8, 1.0), (32, 0.8), (32, 1.3), (200, 1.1), (3, 1.5)])
    def test_matches_direct_integration(self, n, z):
        ref = mp_psi(SETUP, n, z)
        assert log_psi_spherical(SETUP, n, z) == pytest.approx(float(mp.log(ref)), rel=1e-10)

    @pytest.mark.parametrize("z", [0.3, 0.6, 1.0, 1.5])
    def test_matches_simulation(self, z):
        st_ = DistortionSetup(1.0, 0.6)
        samples = 200_000
        p = psi_spherical(st_, 16, z).value
        f = mc_cover(st_, 16, z, CodebookKind.SPHERICAL, samples, seed=int(z * 100))
        assert abs(f - p) <= 3.0 * math.sqrt(p * (1 - p) / samples)

    def test_scale_invariance(self):
        for c in (0.1, 3.0, 50.0):
            assert log_psi_spherical(SETUP.scaled(c), 40, 1.2 * c) == pytest.approx(
                log_psi_spherical(SETUP, 40, 1.2), rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            psi_spherical(SETUP, 10, 0.0)
        with pytest.raises(DomainError):
            psi_spherical(SETUP, 1, 1.0)

    def test_result_fields(self):
        res = psi_spherical(SETUP, 10, 1.0)
        assert res.kind is CodebookKind.SPHERICAL and res.method is ShellMethod.EXACT
        assert 0.0 <= res.value <= 1.0

    @pytest.mark.parametrize("z", [1.0, 1.2, 1.5])
    def test_exponent_limit(self, z):
        assert -log_psi_spherical(SETUP, 2000, z) / 2000 == pytest.approx(r_sp(SETUP, z), rel=0.02)


class TestBounds:
    def test_lower_bound_closed_form(self):
        mp.mp.dps = 40
        ref = mp.gamma(51) / (mp.sqrt(mp.pi) * 100 * mp.gamma(mp.mpf(101) / 2)) * mp.mpf("0.25") ** mp.mpf("49.5")
        assert g_lower(SETUP, 100, 1.0).log_value == pytest.approx(float(mp.log(ref)), rel=1e-13)
        assert g_lower(SETUP, 100, 1.0).method is ShellMethod.LOWER_BOUND

    def test_upper_over_lower_grows_linearly(self):
        ratios = [math.exp(g_upper(SETUP, n, 1.0).log_value - g_lower(SETUP, n, 1.0).log_value) / n
                  for n in (50, 100, 400, 1600, 6400)]
        assert all(r > 0 for r in ratios)
        assert max(ratios) / min(ratios) < 1.1

    @pytest.mark.parametrize("z", [1.0, 1.2, 1.5])
    def test_sandwich_at_64(self, z):
        psi = log_psi_spherical(SETUP, 64, z)
        assert g_lower(SETUP, 64, z).log_value <= psi <= g_upper(SETUP, 64, z).log_value

    @settings(max_examples=80, deadline=None)
    @given(n=st.integers(4, 3000), frac=st.floats(0.0, 0.999), D=st.floats(0.05, 0.95))
    def test_sandwich_property(self, n, frac, D):
        st_ = DistortionSetup(1.0, D)
        lo = max(st_.r1_sq, st_.knee)
        z = lo + frac * (st_.r2_sq - lo)
        if z <= 0:
            return
        psi = log_psi_spherical(st_, n, z)
        assert g_lower(st_, n, z).log_value <= psi + 1e-12 * abs(psi)
        assert psi <= g_upper(st_, n, z).log_value + 1e-12 * abs(psi)

    def test_domains(self):
        with pytest.raises(DomainError):
            g_lower(SETUP, 3, 1.0)
        with pytest.raises(DomainError):
            g_upper(SETUP, 10, 0.4)
        with pytest.raises(DomainError):
            g_lower(SETUP, 10, 2.0)


class TestIid:
    def test_zero_power_is_central(self):
        for n in (1, 5, 40):
            expected = stats.chi2.cdf(n * SETUP.D / SETUP.p_y, n)
            assert upsilon_iid(SETUP, n, 0.0).value == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("z", [0.8, 1.0, 1.3])
    def test_matches_scipy_noncentral(self, z):
        n = 32
        ref = stats.ncx2.cdf(n * SETUP.D / SETUP.p_y, n, n * z / SETUP.p_y)
        assert upsilon_iid(SETUP, n, z).value == pytest.approx(ref, rel=1e-8)

    @pytest.mark.parametrize("z", [0.2, 0.6, 1.0])
    def test_matches_simulation(self, z):
        st_ = DistortionSetup(1.0, 0.6)
        samples = 200_000
        p = upsilon_iid(st_, 16, z).value
        f = mc_cover(st_, 16, z, CodebookKind.IID, samples, seed=int(z * 1000))
        assert abs(f - p) <= 3.0 * math.sqrt(p * (1 - p) / samples)

    def test_decreasing_in_z(self):
        zs = np.linspace(0.0, 4.0, 41)
        vals = log_upsilon_iid(SETUP, 32, zs)
        assert np.all(np.diff(vals) < 0)

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 400), z=st.floats(1e-6, 10.0))
    def test_strictly_inside_unit_interval(self, n, z):
        lv = log_upsilon_iid(SETUP, n, z)
        assert -math.inf < lv < 0.0

    def test_exponent_limit(self):
        assert -log_upsilon_iid(SETUP, 2000, 1.2) / 2000 == pytest.approx(r_iid_star(SETUP, 1.2), rel=0.02)


class TestBahadurRao:
    def test_ratio_band_and_improvement(self):
        e500 = log_upsilon_iid(SETUP, 500, 1.0) - upsilon_bahadur_rao(SETUP, 500, 1.0).log_value
        e1000 = log_upsilon_iid(SETUP, 1000, 1.0) - upsilon_bahadur_rao(SETUP, 1000, 1.0).log_value
        assert 0.5 <= math.exp(e500) <= 2.0
        assert abs(e1000) < abs(e500)

    def test_precondition(self):
        with pytest.raises(PreconditionError):
            upsilon_bahadur_rao(DistortionSetup(1.0, 0.75), 100, 0.3)

    def test_method_tag(self):
        assert upsilon_bahadur_rao(SETUP, 100, 1.2).method is ShellMethod.BAHADUR_RAO
