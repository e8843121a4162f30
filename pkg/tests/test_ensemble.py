import math

import numpy as np
import pytest
from scipy import stats

from gaussrd import (
    CodebookKind, DiscreteSource, DistortionSetup, GaussianSource, RayleighSource, SimPlan, md_probe, pe_conditional,
    pe_direct, pe_quadrature, spherical_floor, ternary_source,
)
from gaussrd.ensemble import EstimateMethod, log_excess_given_cover
from gaussrd.errors import CapabilityError, DegenerateSourceError, DomainError, ResourceError

SPH, IID = CodebookKind.SPHERICAL, CodebookKind.IID
SETUP = DistortionSetup(1.0, 0.25)
G = GaussianSource(1.0)


class TestLogExcess:
    def test_matches_direct_formula(self):
        for p in (0.3, 1e-3, 1e-9):
            for m in (1.0, 10.0, 1e4):
                assert log_excess_given_cover(math.log(p), math.log(m)) == pytest.approx(
                    m * math.log1p(-p), rel=1e-12)

    def test_underflowed_cover_probability(self):
        # P = e^-800, M = e^790: (1 - P)^M = exp(-e^-10)
        assert log_excess_given_cover(-800.0, 790.0) == pytest.approx(-math.exp(-10.0), rel=1e-14)

    def test_never_covered_and_always_covered(self):
        assert log_excess_given_cover(-math.inf, 50.0) == 0.0
        assert log_excess_given_cover(0.0, 1.0) == -math.inf


class TestPlan:
    @pytest.mark.parametrize("kwargs", [dict(n=0, log_m=1.0), dict(n=1, log_m=1.0), dict(n=10, log_m=-1.0),
                                        dict(n=10, log_m=1.0, samples=10), dict(n=10, log_m=1.0, seed=-1),
                                        dict(n=10, log_m=math.inf)])
    def test_rejects(self, kwargs):
        with pytest.raises(DomainError):
            SimPlan(**kwargs)

    def test_kind_coerced(self):
        assert SimPlan(n=4, log_m=0.0, kind="iid").kind is IID


class TestConditional:
    def test_always_covered_source_gives_zero(self):
        # every block has power 0.25 <= r1^2 with r1 < 0, so each spherical codeword covers it
        src = DiscreteSource(support=(-0.5, 0.5), pmf=(0.5, 0.5))
        est = pe_conditional(src, DistortionSetup(1.0, 0.9), SimPlan(n=20, log_m=0.0, samples=1000))
        assert est.value == 0.0 and est.log_value == -math.inf and not est.underflow

    def test_tiny_distortion_never_covered(self):
        est = pe_conditional(G, DistortionSetup(1.0, 1e-6), SimPlan(n=50, log_m=5.0, samples=1000))
        assert est.value == pytest.approx(1.0, abs=1e-12)

    def test_deterministic_and_worker_independent(self):
        plan = SimPlan(n=64, log_m=40.0, samples=20_000, seed=9)
        a = pe_conditional(G, SETUP, plan)
        b = pe_conditional(G, SETUP, plan)
        c = pe_conditional(G, SETUP, SimPlan(n=64, log_m=40.0, samples=20_000, seed=9, worker_streams=4))
        assert a == b
        assert a.value == c.value and a.std_error == c.std_error
        assert pe_conditional(G, SETUP, SimPlan(n=64, log_m=40.0, samples=20_000, seed=10)).value != a.value

    @pytest.mark.parametrize("kind", [SPH, IID])
    @pytest.mark.parametrize("offset", [-4.0, 0.0, 6.0])
    def test_agrees_with_quadrature(self, kind, offset):
        n = 200
        log_m = n * math.log(2.0) + offset
        q = pe_quadrature(G, SETUP, SimPlan(n=n, log_m=log_m, kind=kind))
        c = pe_conditional(G, SETUP, SimPlan(n=n, log_m=log_m, kind=kind, samples=40_000, seed=3))
        assert abs(q.value - c.value) <= 4.0 * c.std_error + 1e-12

    def test_discrete_source_supported(self):
        est = pe_conditional(ternary_source(1.0), SETUP, SimPlan(n=50, log_m=40.0, samples=2000))
        assert 0.0 <= est.value <= 1.0 and est.method is EstimateMethod.CONDITIONAL


class TestQuadrature:
    def test_discrete_source_unsupported(self):
        with pytest.raises(CapabilityError):
            pe_quadrature(ternary_source(1.0), SETUP, SimPlan(n=50, log_m=40.0))

    def test_single_codeword_is_average_miss(self):
        # with M = 1 the excess probability is 1 - E[P(n, Z)]
        n = 10
        est = pe_quadrature(G, SETUP, SimPlan(n=n, log_m=0.0, kind=IID))
        c = pe_conditional(G, SETUP, SimPlan(n=n, log_m=0.0, kind=IID, samples=200_000, seed=1))
        assert abs(est.value - c.value) <= 4.0 * c.std_error

    @pytest.mark.parametrize("kind", [SPH, IID])
    def test_decreasing_in_codebook_size(self, kind):
        vals = [pe_quadrature(G, SETUP, SimPlan(n=100, log_m=lm, kind=kind)).log_value
                for lm in (40.0, 60.0, 70.0, 80.0, 100.0)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_spherical_floor_is_gamma_tail(self):
        n = 100
        law = stats.gamma(n / 2, scale=2.0 / n)
        ref = law.cdf(SETUP.r1_sq) + law.sf(SETUP.r2_sq)
        assert math.exp(spherical_floor(G, SETUP, n)) == pytest.approx(ref, rel=1e-10)

    def test_floor_bounds_spherical_pe(self):
        for lm in (60.0, 120.0, 500.0):
            est = pe_quadrature(G, SETUP, SimPlan(n=100, log_m=lm))
            assert est.log_value >= spherical_floor(G, SETUP, 100)

    def test_huge_codebook_drives_iid_pe_to_zero(self):
        est = pe_quadrature(G, SETUP, SimPlan(n=100, log_m=2000.0, kind=IID))
        assert est.log_value < -500.0 and est.underflow

    def test_rayleigh(self):
        src = RayleighSource.from_power(1.0)
        q = pe_quadrature(src, SETUP, SimPlan(n=100, log_m=75.0))
        c = pe_conditional(src, SETUP, SimPlan(n=100, log_m=75.0, samples=40_000, seed=2))
        assert abs(q.value - c.value) <= 4.0 * c.std_error


class TestDirect:
    @pytest.mark.parametrize("kind", [SPH, IID])
    def test_one_codeword(self, kind):
        d = pe_direct(G, SETUP, 8, 1, trials=40_000, seed=4, kind=kind)
        c = pe_conditional(G, SETUP, SimPlan(n=8, log_m=0.0, kind=kind, samples=100_000, seed=7))
        assert abs(d.value - c.value) <= 4.0 * math.hypot(d.std_error, c.std_error)

    def test_deterministic_and_worker_independent(self):
        a = pe_direct(G, SETUP, 16, 64, trials=5000, seed=11)
        b = pe_direct(G, SETUP, 16, 64, trials=5000, seed=11, workers=3)
        assert a == b and a.method is EstimateMethod.DIRECT

    def test_resource_limit(self):
        with pytest.raises(ResourceError):
            pe_direct(G, SETUP, 16, 2 ** 30, trials=10)

    @pytest.mark.parametrize("m_count,trials", [(0, 10), (2.5, 10), (4, 1)])
    def test_bad_arguments(self, m_count, trials):
        with pytest.raises(DomainError):
            pe_direct(G, SETUP, 16, m_count, trials=trials)


class TestModerateDeviations:
    @pytest.mark.parametrize("t", [0.0, 0.5, 0.6, -0.1])
    def test_exponent_range(self, t):
        with pytest.raises(DomainError):
            md_probe(G, SETUP, t, [100])

    def test_accepts_inside_range(self):
        pts = md_probe(G, SETUP, 0.49, [200])
        assert pts[0].n == 200 and pts[0].xi == pytest.approx(200 ** -0.49)
        assert pts[0].measured > 0

    def test_zero_dispersion(self):
        with pytest.raises(DegenerateSourceError):
            md_probe(DiscreteSource(support=(-1.0, 1.0), pmf=(0.5, 0.5)), SETUP, 0.2, [100])

    def test_discrete_source_falls_back_to_simulation(self):
        pts = md_probe(ternary_source(1.0), SETUP, 0.2, [100], samples=2000)
        assert np.isfinite(pts[0].log_pe)
