"""Single-codeword cover probabilities ``Pr{d(x^n, Y^n) <= D}``.

The probability depends on the source block only through its power
``z = |x^n|^2 / n``. For the spherical codebook it is the upper tail of the
first coordinate of a uniform point on the sphere; the shifted coordinate
``(1 + Y_1 / sqrt(n p_y)) / 2`` is Beta((n-1)/2, (n-1)/2), so the tail is an
incomplete beta function. For the i.i.d. codebook it is a non-central
chi-square CDF.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import specfun
from .asymptotics import r_iid, s_star, tilted_variance
from .distortion import CodebookKind, DistortionSetup
from .errors import DomainError, PreconditionError

__all__ = [
    "CodebookKind", "DistortionSetup", "ShellMethod", "ShellProbability",
    "log_psi_spherical", "psi_spherical", "log_g_lower", "g_lower", "log_g_upper", "g_upper",
    "log_upsilon_iid", "upsilon_iid", "upsilon_bahadur_rao", "log_cover_probability",
]


class ShellMethod(str, enum.Enum):
    EXACT = "exact"
    LOWER_BOUND = "lower_bound"
    UPPER_BOUND = "upper_bound"
    BAHADUR_RAO = "bahadur_rao"


@dataclass(frozen=True)
class ShellProbability:
    z: float
    log_value: float
    kind: CodebookKind
    method: ShellMethod

    @property
    def value(self):
        return min(1.0, math.exp(self.log_value))


def _check_z(z, positive=True):
    z = np.asarray(z, dtype=float)
    bad = ~(z > 0) if positive else ~(z >= 0)
    if np.any(bad) or not np.all(np.isfinite(z)):
        raise DomainError("source power z must be " + ("positive" if positive else "non-negative") + " and finite")
    return z


def log_psi_spherical(setup, n, z):
    """Log cover probability of one spherical codeword (vectorized in ``z``)."""
    if n < 2:
        raise DomainError("spherical cover probability needs n >= 2")
    z = _check_z(z)
    a = (n - 1) / 2.0
    omh = np.asarray(setup.one_minus_h(z))
    s = 2.0 * np.sqrt(z * setup.p_y)
    num = z + setup.p_y - setup.D
    with np.errstate(divide="ignore", invalid="ignore"):
        # 1 -/+ u0 with u0 = num / s, each formed without cancellation
        one_minus_u = np.where(num > 0, s * omh / (s + num), (s - num) / s)
        one_plus_u = np.where(num < 0, s * omh / (s - num), (s + num) / s)
    x = np.clip(one_minus_u / 2.0, 0.0, 1.0)
    y = np.clip(one_plus_u / 2.0, 0.0, 1.0)
    hard_zero = (z > setup.r2_sq) | ((setup.r1 > 0) & (z < setup.r1_sq))
    out = np.full(z.shape, -np.inf)
    out[(y == 0) & ~hard_zero] = 0.0
    live = ~hard_zero & (x > 0) & (y > 0)
    if np.any(live):
        out[live] = specfun.log_reg_inc_beta(a, a, x[live], y[live])
    return specfun._out(out)


def psi_spherical(setup, n, z):
    """Exact spherical cover probability; zero outside ``[r1^2, r2^2]``."""
    return ShellProbability(z=float(z), log_value=log_psi_spherical(setup, n, float(z)),
                            kind=CodebookKind.SPHERICAL, method=ShellMethod.EXACT)


def log_g_lower(setup, n, z):
    z = _check_z(z)
    if n < 4:
        raise DomainError("bounds need n >= 4")
    if np.any((z < setup.r1_sq) | (z > setup.r2_sq)):
        raise DomainError("lower bound defined for r1^2 <= z <= r2^2")
    lead = specfun.log_gamma((n + 2) / 2.0) - specfun.log_gamma((n + 1) / 2.0) - 0.5 * math.log(math.pi) - math.log(n)
    with np.errstate(divide="ignore"):
        return specfun._out(lead + (n - 1) / 2.0 * np.log(np.maximum(setup.one_minus_h(z), 0.0)))


def log_g_upper(setup, n, z):
    z = _check_z(z)
    if n < 4:
        raise DomainError("bounds need n >= 4")
    if np.any((z < setup.knee) | (z > setup.r2_sq) | (z + setup.p_y - setup.D < 0)):
        raise DomainError("upper bound defined for |sigma2 - 2D| <= z <= r2^2")
    lead = specfun.log_gamma(n / 2.0) - specfun.log_gamma((n - 1) / 2.0) - 0.5 * math.log(math.pi)
    with np.errstate(divide="ignore"):
        return specfun._out(lead + (n - 3) / 2.0 * np.log(np.maximum(setup.one_minus_h(z), 0.0)))


def g_lower(setup, n, z):
    """Closed-form lower bound on the spherical cover probability."""
    return ShellProbability(z=float(z), log_value=log_g_lower(setup, n, float(z)),
                            kind=CodebookKind.SPHERICAL, method=ShellMethod.LOWER_BOUND)


def g_upper(setup, n, z):
    """Closed-form upper bound, from enlarging the integration range of the Y_1 density."""
    return ShellProbability(z=float(z), log_value=log_g_upper(setup, n, float(z)),
                            kind=CodebookKind.SPHERICAL, method=ShellMethod.UPPER_BOUND)


def log_upsilon_iid(setup, n, z):
    """Log cover probability of one i.i.d. Gaussian codeword.

    ``sum_i (Y_i - sqrt z)^2 / p_y`` is non-central chi-square with ``n``
    degrees of freedom and non-centrality ``n z / p_y``.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    z = _check_z(z, positive=False)
    return specfun.log_noncentral_chi2_cdf(n, n * z / setup.p_y, n * setup.D / setup.p_y)


def upsilon_iid(setup, n, z):
    return ShellProbability(z=float(z), log_value=log_upsilon_iid(setup, n, float(z)),
                            kind=CodebookKind.IID, method=ShellMethod.EXACT)


def upsilon_bahadur_rao(setup, n, z):
    """Strong large-deviations approximation of the i.i.d. cover probability.

    ``exp(-n r) / (s sqrt(2 pi n v))`` with ``s`` the optimal tilt, ``r`` the
    Chernoff exponent and ``v`` the tilted variance of the per-letter
    distortion.
    """
    z = float(_check_z(z, positive=False))
    s = s_star(setup, z)
    if s <= 0:
        raise PreconditionError("approximation undefined where the optimal tilt vanishes (z <= max(0, 2D - sigma2))")
    v = tilted_variance(setup, s, z)
    log_val = -n * r_iid(setup, s, z) - math.log(s) - 0.5 * math.log(2.0 * math.pi * n * v)
    return ShellProbability(z=z, log_value=log_val, kind=CodebookKind.IID, method=ShellMethod.BAHADUR_RAO)


def log_cover_probability(setup, n, z, kind):
    """Dispatch to the exact log cover probability of the given codebook kind."""
    if CodebookKind(kind) is CodebookKind.SPHERICAL:
        return log_psi_spherical(setup, n, z)
    return log_upsilon_iid(setup, n, z)
