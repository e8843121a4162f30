"""End-to-end invariant suites run by ``gaussrd validate``.

Each check returns an :class:`InvariantResult` whose ``worst_slack`` is the
smallest margin by which the invariant held over its grid (negative means
violated).
"""

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import asymptotics as asy
from .distortion import CodebookKind, DistortionSetup
from .ensemble import SimPlan, pe_conditional, pe_direct, pe_quadrature, spherical_floor
from .shellprob import log_g_lower, log_g_upper, log_psi_spherical, log_upsilon_iid
from .sources import GaussianSource, RayleighSource, legendre_x2, source_from_config

FIXTURES = ("gaussian", "ternary", "rayleigh")


@dataclass(frozen=True)
class InvariantResult:
    name: str
    grid: str
    worst_slack: float
    passed: bool


def load_fixture(name):
    """Parse one of the shipped source configurations."""
    text = resources.files("gaussrd").joinpath("data", f"{name}.json").read_text()
    return source_from_config(json.loads(text))


def _result(name, grid, slacks, tol=0.0):
    worst = float(min(slacks)) if len(slacks) else math.inf
    return InvariantResult(name=name, grid=grid, worst_slack=worst, passed=worst >= -tol)


def check_sandwich(setup, ns=(4, 8, 16, 64, 256), points=40, gupper_scale=1.0):
    """``g_lower <= psi <= g_upper`` on a z-grid over ``[max(r1^2, knee), r2^2)``.

    Slack is measured in log space relative to the bound, so it is
    meaningful even where all three values underflow.
    """
    lo = max(setup.r1_sq, setup.knee)
    zs = np.linspace(lo, setup.r2_sq, points + 1)[:-1]
    zs = zs[zs > 0]
    log_scale = math.log(gupper_scale)
    slacks = []
    for n in ns:
        psi = log_psi_spherical(setup, n, zs)
        gl = log_g_lower(setup, n, zs)
        gu = log_g_upper(setup, n, zs) + log_scale
        for a, b in ((gl, psi), (psi, gu)):
            both = np.isfinite(a) & np.isfinite(b)
            slacks.extend((b - a)[both])
            slacks.extend(np.where(np.isneginf(a[~both]) | np.isposinf(b[~both]), 0.0, -np.inf))
    return _result("sandwich g_lower <= psi <= g_upper", f"n={list(ns)}, {zs.size} z in [{lo:.4g}, {setup.r2_sq:.4g})",
                   slacks, tol=1e-12)


def check_zero_region(setup, ns=(8, 64, 512)):
    outside = [setup.r2_sq * 1.0001, setup.r2_sq * 2.0, setup.r2_sq + 1.0]
    if setup.r1 > 0:
        outside += [setup.r1_sq * 0.5, setup.r1_sq * 0.9999]
    z = np.array(outside)
    slacks = [0.0 if np.isneginf(v) else -math.exp(v)
              for n in ns for v in np.atleast_1d(log_psi_spherical(setup, n, z))]
    return _result("spherical zero region outside [r1^2, r2^2]", f"n={list(ns)}, z={[round(v, 6) for v in outside]}",
                   slacks)


def check_monotone(setup, ns=(16, 128), points=40):
    zs = np.linspace(setup.knee, setup.r2_sq, points + 1)[:-1]
    zs = zs[zs > 0]
    slacks = []
    for n in ns:
        for f in (log_psi_spherical, log_upsilon_iid):
            vals = np.exp(np.asarray(f(setup, n, zs)))
            slacks.extend(vals[:-1] - vals[1:])
    return _result("shell probabilities non-increasing in z", f"n={list(ns)}, {zs.size} z from the knee", slacks,
                   tol=1e-15)


def check_exponent_limits(setup, n=2000, rel=0.02):
    z = 1.2 * setup.sigma2
    sp = -log_psi_spherical(setup, n, z) / n
    iid = -log_upsilon_iid(setup, n, z) / n
    slacks = [rel - abs(sp / asy.r_sp(setup, z) - 1.0), rel - abs(iid / asy.r_iid_star(setup, z) - 1.0)]
    return _result("finite-n exponents near their limits", f"n={n}, z=1.2 sigma2, tolerance {rel:.0%}", slacks)


def check_companion(setup, count=50):
    if setup.knee <= setup.r1_sq:
        return InvariantResult("companion root", "empty lower branch", math.inf, True)
    alphas = np.linspace(setup.sigma2, setup.r2_sq, count + 1)[:-1]
    slacks = []
    for alpha in alphas:
        beta = asy.companion_beta(setup, alpha)
        slacks.append(1e-12 - abs(asy.h_func(setup, beta) - asy.h_func(setup, alpha)))
        slacks.append(2.0 * setup.sigma2 - alpha - beta)
    return _result("companion root h(beta) = h(alpha), alpha + beta <= 2 sigma2",
                   f"{count} alpha in [sigma2, r2^2)", slacks, tol=1e-12)


def check_exponent_order(model, D, steps=12):
    setup = DistortionSetup(model.sigma2, D)
    r0 = asy.rd_function(setup.sigma2, D)
    slacks = []
    prev = {k: 0.0 for k in CodebookKind}
    for R in r0 + np.linspace(0.02, 0.6, steps):
        e = {k: asy.exponent(model, setup, R, k).exponent for k in CodebookKind}
        if math.isinf(e[CodebookKind.SPHERICAL]):
            break
        slacks.append(min(e[CodebookKind.IID] - e[CodebookKind.SPHERICAL], 1.0))
        for k in CodebookKind:
            if math.isfinite(prev[k]):
                slacks.append(min(e[k] - prev[k], 1.0))
            prev[k] = e[k]
    slacks.extend(-abs(asy.exponent(model, setup, r0, k).exponent) for k in CodebookKind)
    return _result(f"E_iid > E_sp, both increasing, zero at R(D) ({model.kind})", f"D={D:.6g}, {steps} rates", slacks)


def check_legendre(ts=None):
    ts = np.linspace(1.0, 5.0, 17) if ts is None else ts
    cases = [(GaussianSource(1.0), lambda r: 0.5 * (r - 1.0 - math.log(r))),
             (RayleighSource.from_power(1.0), lambda r: r - 1.0 - math.log(r))]
    slacks = [1e-8 - abs(legendre_x2(m, t).value - closed(t / m.sigma2)) for m, closed in cases for t in ts]
    return _result("numeric Legendre transform matches closed forms", f"{len(ts)} t in [sigma2, 5 sigma2]", slacks)


def check_methods(setup, samples, trials):
    """Conditional, quadrature and direct estimators agree within 4 combined standard errors."""
    model = GaussianSource(setup.sigma2)
    slacks = []
    cells = [(16, math.log(16)), (16, math.log(64))]
    for kind in CodebookKind:
        for n, log_m in cells:
            plan = SimPlan(n=n, log_m=log_m, kind=kind, samples=samples, seed=7)
            cond = pe_conditional(model, setup, plan)
            quad = pe_quadrature(model, setup, plan)
            direct = pe_direct(model, setup, n, round(math.exp(log_m)), trials, seed=11, kind=kind)
            slacks.append(4.0 * cond.std_error - abs(cond.value - quad.value))
            slacks.append(4.0 * direct.std_error - abs(direct.value - quad.value))
            slacks.append(4.0 * math.hypot(cond.std_error, direct.std_error) - abs(cond.value - direct.value))
    return _result("estimator agreement (conditional, quadrature, direct)",
                   f"Gaussian, n=16, M in {{16, 64}}, both kinds, {samples} samples, {trials} trials", slacks)


def check_monotone_in_m(setup, n=100):
    model = GaussianSource(setup.sigma2)
    slacks = []
    for kind in CodebookKind:
        vals = [pe_quadrature(model, setup, SimPlan(n=n, log_m=lm, kind=kind)).log_value for lm in (10.0, 30.0, 60.0)]
        slacks.extend(np.diff(vals) * -1.0)
    floor = spherical_floor(model, setup, n)
    sph = pe_quadrature(model, setup, SimPlan(n=n, log_m=10.0 * n, kind=CodebookKind.SPHERICAL)).log_value
    slacks.append(sph - floor + 1e-9)
    return _result("P_e non-increasing in M, spherical floor", f"Gaussian, n={n}, log M in {{10, 30, 60, {10 * n}}}",
                   slacks, tol=1e-12)


def run_all(quick=False, gupper_scale=1.0, D=0.25):
    """Run every suite; ``gupper_scale`` is a corruption hook for negative tests."""
    setup = DistortionSetup(1.0, D)
    alt = DistortionSetup(1.0, 0.6)
    results = [
        check_sandwich(setup, points=12 if quick else 40, gupper_scale=gupper_scale),
        check_sandwich(alt, points=12 if quick else 40, gupper_scale=gupper_scale),
        check_zero_region(setup),
        check_zero_region(alt),
        check_monotone(setup, points=12 if quick else 40),
        check_exponent_limits(setup),
        check_companion(setup, count=10 if quick else 50),
        check_legendre(np.linspace(1.0, 5.0, 5 if quick else 17)),
    ]
    for name in FIXTURES:
        model = load_fixture(name)
        results.append(check_exponent_order(model, D * model.sigma2, steps=6 if quick else 12))
    results.append(check_monotone_in_m(setup))
    results.append(check_methods(setup, samples=20_000 if quick else 100_000, trials=4_000 if quick else 20_000))
    return results
