"""Closed-form and root-solved asymptotic quantities.

Rates are in nats per source symbol throughout. ``setup`` arguments are
:class:`~gaussrd.distortion.DistortionSetup` instances.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import specfun
from .distortion import CodebookKind, DistortionSetup
from .errors import ConfigurationError, DegenerateSourceError, DomainError
from .sources import legendre_x2


def _out(arr):
    arr = np.asarray(arr)
    return float(arr) if arr.ndim == 0 else arr


def _bisect(f, lo, hi, max_iter=400):
    """Root of ``f`` on ``[lo, hi]`` given ``f(lo) > 0 >= f(hi)`` (or the reverse)."""
    f_lo = f(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        f_mid = f(mid)
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# First and second order
# --------------------------------------------------------------------------

def rd_function(sigma2, D):
    """Ensemble rate-distortion function ``0.5 ln max{1, sigma2 / D}``."""
    if not (sigma2 > 0 and D > 0):
        raise DomainError("rd_function requires sigma2 > 0 and D > 0")
    return 0.5 * math.log(max(1.0, sigma2 / D))


def dispersion(sigma2, zeta):
    """Mismatched dispersion ``(zeta - sigma2^2) / (4 sigma2^2)``."""
    if not sigma2 > 0:
        raise DomainError("sigma2 must be positive")
    if zeta < sigma2 ** 2 * (1.0 - 1e-12):
        raise DomainError("zeta must be at least sigma2^2")
    return max(zeta - sigma2 ** 2, 0.0) / (4.0 * sigma2 ** 2)


def md_constant(sigma2, zeta):
    """Moderate-deviations constant ``1 / (2 V)``; requires ``V > 0``."""
    v = dispersion(sigma2, zeta)
    if v <= 0:
        raise DegenerateSourceError("moderate-deviations constant needs positive dispersion")
    return 1.0 / (2.0 * v)


@dataclass(frozen=True)
class SecondOrderPoint:
    n: int
    epsilon: float
    log_m: float
    first_order: float
    second_order: float
    third_order_coeff: float = 0.0

    @property
    def rate(self):
        return self.log_m / self.n


def second_order_logM(n, epsilon, sigma2, zeta, D, third_order_coeff=0.0):
    """``log M = (n/2) ln(sigma2/D) + sqrt(n V) Q^{-1}(eps) + coeff ln n``.

    The ``ln n`` coefficient is not determined asymptotically; it defaults
    to zero and is left to the caller.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if not 0 < epsilon < 1:
        raise DomainError("epsilon must lie in (0, 1)")
    first = n * rd_function(sigma2, D)
    second = math.sqrt(n * dispersion(sigma2, zeta)) * specfun.q_inv(epsilon)
    return SecondOrderPoint(n=n, epsilon=epsilon, log_m=first + second + third_order_coeff * math.log(n),
                            first_order=first, second_order=second, third_order_coeff=third_order_coeff)


# --------------------------------------------------------------------------
# Cover exponents
# --------------------------------------------------------------------------

def h_func(setup, z):
    """``(z + p_y - D)^2 / (4 z p_y)``; equals 1 at both shell radii."""
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0)):
        raise DomainError("h_func requires z > 0")
    return _out((z + setup.p_y - setup.D) ** 2 / (4.0 * z * setup.p_y))


def _r_sp_from_gap(setup, gap):
    """r_sp at ``z = r2^2 - gap`` without forming ``r2^2 - z`` in floating point."""
    z = setup.r2_sq - gap
    return -0.5 * math.log((z - setup.r1_sq) * gap / (4.0 * z * setup.p_y))


def r_sp(setup, z):
    """Cover exponent of the spherical codebook for a block of power ``z``."""
    z = np.asarray(z, dtype=float)
    if np.any(~((z > setup.r1_sq) & (z < setup.r2_sq))):
        raise DomainError("r_sp requires r1^2 < z < r2^2")
    return _out(-0.5 * np.log(setup.one_minus_h(z)))


def s_star(setup, z):
    """Optimal tilt ``max{0, (sigma2 - 3D + sqrt((sigma2 - D)^2 + 4 z D)) / (4 D)}``."""
    z = np.asarray(z, dtype=float)
    if np.any(~(z >= 0)):
        raise DomainError("s_star requires z >= 0")
    s2, d = setup.sigma2, setup.D
    val = (s2 - 3.0 * d + np.sqrt((s2 - d) ** 2 + 4.0 * z * d)) / (4.0 * d)
    return _out(np.maximum(val, 0.0))


def r_iid(setup, s, z):
    """Chernoff exponent of the i.i.d. Gaussian codebook at tilt ``s``."""
    s = np.asarray(s, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(~(s >= 0)) or np.any(~(z >= 0)):
        raise DomainError("r_iid requires s >= 0 and z >= 0")
    u = 1.0 + 2.0 * s
    py = setup.p_y
    return _out(0.5 * np.log(u) + s * z / (u * py) - s * setup.D / py)


def r_iid_star(setup, z):
    """``r_iid(s_star(z), z)``, the supremum of ``r_iid`` over ``s >= 0``."""
    return r_iid(setup, s_star(setup, z), z)


def kappa(setup, s, z):
    """``(p_y (1 + 2s) + 2z)^2 / (p_y (1 + 2s)^3)``.

    This closed form is carried for reference only. It is not scale free
    and does not equal the tilted variance; it exceeds
    :func:`tilted_variance` by the factor ``(p_y (1 + 2s) + 2z) / 2``.
    """
    u = 1.0 + 2.0 * np.asarray(s, dtype=float)
    z = np.asarray(z, dtype=float)
    py = setup.p_y
    return _out((py * u + 2.0 * z) ** 2 / (py * u ** 3))


def tilted_variance(setup, s, z):
    """Second derivative in ``s`` of ``ln E exp(-s W)``, ``W = (Y - sqrt z)^2 / p_y``.

    ``W`` is non-central chi-square with one degree of freedom, so the
    derivative is ``2 (p_y (1 + 2s) + 2z) / (p_y (1 + 2s)^3)``.
    """
    u = 1.0 + 2.0 * np.asarray(s, dtype=float)
    z = np.asarray(z, dtype=float)
    py = setup.p_y
    return _out(2.0 * (py * u + 2.0 * z) / (py * u ** 3))


def companion_beta(setup, alpha):
    """Unique ``beta`` in ``(r1^2, |sigma2 - 2D|)`` with ``h(beta) = h(alpha)``.

    ``h`` decreases strictly on that interval, from 1 at ``r1^2`` to its
    minimum at the knee, and ``h(alpha)`` lies between the two, so
    bisection brackets the root.
    """
    if not setup.sigma2 <= alpha < setup.r2_sq:
        raise DomainError("companion_beta requires sigma2 <= alpha < r2^2")
    lo, hi = setup.r1_sq, setup.knee
    if not lo < hi:
        raise DomainError("empty lower branch: sigma2 == 2D")
    level = h_func(setup, alpha)
    c = setup.p_y - setup.D
    py = setup.p_y
    return _bisect(lambda b: (b + c) ** 2 / (4.0 * b * py) - level, lo, hi)


# --------------------------------------------------------------------------
# Excess-distortion exponents
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentPoint:
    """Point on an excess-distortion exponent curve.

    ``alpha`` is ``nan`` below the rate-distortion function, where the
    exponent is zero and no power level is selected. ``exponent`` is
    ``inf`` when the source cannot reach power ``alpha``.
    """

    rate: float
    alpha: float
    exponent: float
    kind: CodebookKind

    @property
    def infinite(self):
        return math.isinf(self.exponent)


def solve_alpha(setup, R, kind):
    """Power level ``alpha >= sigma2`` at which the cover exponent equals ``R``."""
    kind = CodebookKind(kind)
    r0 = 0.5 * math.log(setup.sigma2 / setup.D)
    if R < r0:
        raise DomainError(f"rate {R!r} lies below the rate-distortion function {r0!r}")
    if R == r0:
        return setup.sigma2

    if kind is CodebookKind.SPHERICAL:
        # r_sp diverges like -0.5 ln(r2^2 - z); bisect in w = -ln(r2^2 - z)
        w_lo = -math.log(setup.r2_sq - setup.sigma2)
        w_hi = w_lo + 1.0
        while _r_sp_from_gap(setup, math.exp(-w_hi)) < R:
            w_lo, w_hi = w_hi, w_lo + 2.0 * (w_hi - w_lo)
            if math.exp(-w_hi) < 4 * math.ulp(setup.r2_sq):
                break
        w = _bisect(lambda w: R - _r_sp_from_gap(setup, math.exp(-w)), w_lo, w_hi)
        alpha = setup.r2_sq - math.exp(-w)
        return min(alpha, math.nextafter(setup.r2_sq, 0.0))

    lo, hi = setup.sigma2, 2.0 * setup.sigma2
    while r_iid_star(setup, hi) < R:
        lo, hi = hi, 2.0 * hi
    return _bisect(lambda z: R - r_iid_star(setup, z), lo, hi)


def exponent(model, setup, R, kind):
    """Ensemble excess-distortion exponent at rate ``R``."""
    kind = CodebookKind(kind)
    if abs(model.sigma2 - setup.sigma2) > 1e-9 * max(1.0, setup.sigma2):
        raise ConfigurationError(f"source power {model.sigma2!r} does not match setup sigma2 {setup.sigma2!r}")
    if R < 0:
        raise DomainError("rate must be non-negative")
    r0 = 0.5 * math.log(setup.sigma2 / setup.D)
    if R < r0:
        return ExponentPoint(rate=R, alpha=math.nan, exponent=0.0, kind=kind)
    alpha = solve_alpha(setup, R, kind)
    return ExponentPoint(rate=R, alpha=alpha, exponent=legendre_x2(model, alpha).value, kind=kind)


def exponent_curve(model, setup, R_grid, kind):
    """:func:`exponent` mapped over a rate grid."""
    return [exponent(model, setup, float(R), kind) for R in R_grid]
