"""Memoryless source models.

A source is described by the law of a single symbol ``X``. Everything the
rest of the package needs is a function of ``X^2``: its moments, its
cumulant generating function, the Fenchel-Legendre transform of that CGF,
and the law of the block power ``Z = |X^n|^2 / n``.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy import special as _sp

from . import specfun
from .errors import CapabilityError, ValidationError

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


# --------------------------------------------------------------------------
# Random number streams
# --------------------------------------------------------------------------

def make_rng(seed, stream=0):
    """Counter-based generator keyed by ``(seed, stream)``.

    Philox is counter based, so distinct stream ids give independent
    sequences regardless of how work is scheduled.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(seq))


# --------------------------------------------------------------------------
# Result types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentSummary:
    """Moments of ``X^2`` and the mismatched dispersion."""

    sigma2: float
    zeta: float
    sixth: float
    T: float
    var_x2: float
    dispersion: float

    @property
    def degenerate(self):
        """True when ``Var[X^2]`` vanishes (constant ``|X|``)."""
        return self.var_x2 <= 1e-15 * self.sigma2 ** 2


@dataclass(frozen=True)
class LegendrePoint:
    """One evaluation of ``sup_{theta >= 0} {theta t - Lambda(theta)}``.

    ``theta_star`` is ``inf`` when the supremum is only approached as
    ``theta`` grows without bound; ``value`` is ``inf`` when the supremum
    itself diverges (``t`` beyond the essential supremum of ``X^2``).
    """

    t: float
    theta_star: float
    value: float

    @property
    def infinite(self):
        return math.isinf(self.value)


@dataclass(frozen=True)
class PowerLaw:
    """Exact Gamma law of the block power ``Z`` (shape ``k``, scale ``theta``)."""

    shape: float
    scale: float

    @property
    def mean(self):
        return self.shape * self.scale

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore"):
            out = ((self.shape - 1.0) * np.log(np.where(z > 0, z, 1.0)) - z / self.scale
                   - _sp.gammaln(self.shape) - self.shape * math.log(self.scale))
        return specfun._out(np.where(z > 0, out, -np.inf))

    def pdf(self, z):
        return specfun._out(np.exp(self.logpdf(z)))

    def logcdf(self, z):
        return specfun.log_reg_inc_gamma_lower(self.shape, np.maximum(np.asarray(z, dtype=float), 0.0) / self.scale)

    def logsf(self, z):
        return specfun.log_reg_inc_gamma_upper(self.shape, np.maximum(np.asarray(z, dtype=float), 0.0) / self.scale)

    def cdf(self, z):
        return specfun._out(np.exp(self.logcdf(z)))

    def sf(self, z):
        return specfun._out(np.exp(self.logsf(z)))

    def ppf(self, q):
        """Quantile by bisection on the CDF (monotone, so bisection is safe)."""
        if not 0.0 < q < 1.0:
            raise ValueError("quantile level must lie in (0, 1)")
        lo, hi = 0.0, self.mean
        while self.cdf(hi) < q:
            lo, hi = hi, 2.0 * hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) < q:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# Source models
# --------------------------------------------------------------------------

class SourceModel:
    """Base class. Subclasses are immutable and safe to share across threads."""

    kind = "abstract"

    #: Supremum of the finiteness domain of the CGF of X^2.
    theta_max = math.inf

    def moments(self):
        raise NotImplementedError

    def cgf_x2(self, theta):
        raise NotImplementedError

    def sample(self, rng, size):
        raise NotImplementedError

    def power_law(self, n):
        return None

    @property
    def sigma2(self):
        return self.moments().sigma2

    @property
    def max_x2(self):
        """Essential supremum of X^2 (``inf`` for unbounded sources)."""
        return math.inf


@dataclass(frozen=True)
class DiscreteSource(SourceModel):
    support: tuple
    pmf: tuple
    kind = "discrete"

    def __post_init__(self):
        support = tuple(float(v) for v in self.support)
        pmf = tuple(float(p) for p in self.pmf)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "pmf", pmf)
        if not support:
            raise ValidationError("support must be non-empty", field="support")
        if len(support) != len(pmf):
            raise ValidationError("support and pmf must have the same length", field="pmf")
        if not all(math.isfinite(v) for v in support):
            raise ValidationError("support entries must be finite", field="support")
        if any(not p >= 0 for p in pmf):
            raise ValidationError("pmf entries must be >= 0", field="pmf")
        if abs(math.fsum(pmf) - 1.0) > 1e-12:
            raise ValidationError(f"pmf sums to {math.fsum(pmf)!r}, expected 1", field="pmf")
        if math.fsum(p * v * v for p, v in zip(pmf, support)) <= 0:
            raise ValidationError("E[X^2] must be positive", field="support")

    def _atoms(self):
        x2 = np.array([v * v for v in self.support])
        p = np.array(self.pmf)
        keep = p > 0
        return x2[keep], p[keep]

    def moments(self):
        x2, p = self._atoms()
        s2 = math.fsum(p * x2)
        dev = x2 - s2
        var = math.fsum(p * dev ** 2)
        return MomentSummary(
            sigma2=s2,
            zeta=math.fsum(p * x2 ** 2),
            sixth=math.fsum(p * x2 ** 3),
            T=math.fsum(p * np.abs(dev) ** 3),
            var_x2=var,
            dispersion=var / (4.0 * s2 ** 2),
        )

    def cgf_x2(self, theta):
        x2, p = self._atoms()
        return float(_sp.logsumexp(theta * x2, b=p))

    @property
    def max_x2(self):
        return float(self._atoms()[0].max())

    def prob_max_x2(self):
        x2, p = self._atoms()
        return float(p[x2 == x2.max()].sum())

    def sample(self, rng, size):
        return rng.choice(np.array(self.support), size=size, p=np.array(self.pmf))


@dataclass(frozen=True)
class GaussianSource(SourceModel):
    variance: float
    kind = "gaussian"

    def __post_init__(self):
        if not (math.isfinite(self.variance) and self.variance > 0):
            raise ValidationError("variance must be a positive finite number", field="variance")

    @property
    def theta_max(self):
        return 1.0 / (2.0 * self.variance)

    def moments(self):
        v = self.variance
        # E|W - 1|^3 for W ~ chi^2_1 from truncated normal moments on |g| < 1
        phi1 = math.exp(-0.5) / math.sqrt(2.0 * math.pi)
        m0 = math.erf(1.0 / math.sqrt(2.0))
        m2 = m0 - 2.0 * phi1
        m4 = 3.0 * m2 - 2.0 * phi1
        m6 = 5.0 * m4 - 2.0 * phi1
        below = m0 - 3.0 * m2 + 3.0 * m4 - m6
        abs3 = 8.0 + 2.0 * below
        return MomentSummary(sigma2=v, zeta=3.0 * v * v, sixth=15.0 * v ** 3,
                             T=abs3 * v ** 3, var_x2=2.0 * v * v, dispersion=0.5)

    def cgf_x2(self, theta):
        arg = 1.0 - 2.0 * theta * self.variance
        return -0.5 * math.log(arg) if arg > 0 else math.inf

    def sample(self, rng, size):
        return rng.normal(0.0, math.sqrt(self.variance), size=size)

    def power_law(self, n):
        return PowerLaw(shape=n / 2.0, scale=2.0 * self.variance / n)


@dataclass(frozen=True)
class RayleighSource(SourceModel):
    """Rayleigh source with the numpy scale convention: ``E[X^2] = 2 scale^2``."""

    scale: float
    kind = "rayleigh"

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValidationError("scale must be a positive finite number", field="scale")

    @classmethod
    def from_power(cls, sigma2):
        return cls(scale=math.sqrt(sigma2 / 2.0))

    @property
    def _s2(self):
        return 2.0 * self.scale ** 2

    @property
    def theta_max(self):
        return 1.0 / self._s2

    def moments(self):
        s2 = self._s2
        # X^2 is exponential with mean s2
        return MomentSummary(sigma2=s2, zeta=2.0 * s2 ** 2, sixth=6.0 * s2 ** 3,
                             T=(12.0 / math.e - 2.0) * s2 ** 3, var_x2=s2 ** 2, dispersion=0.25)

    def cgf_x2(self, theta):
        arg = 1.0 - theta * self._s2
        return -math.log(arg) if arg > 0 else math.inf

    def sample(self, rng, size):
        return rng.rayleigh(self.scale, size=size)

    def power_law(self, n):
        return PowerLaw(shape=float(n), scale=self._s2 / n)


@dataclass(frozen=True)
class CustomSource(SourceModel):
    """Source given by handles.

    ``sampler(rng, size)`` draws symbols, ``cgf(theta)`` returns the CGF of
    ``X^2`` (``inf`` outside its domain) and ``moment_values`` maps any of
    ``sigma2``, ``zeta``, ``sixth``, ``T`` to numbers.
    """

    sampler: Callable
    cgf: Callable
    moment_values: Mapping = field(default_factory=dict)
    kind = "custom"

    def moments(self):
        missing = [k for k in ("sigma2", "zeta") if k not in self.moment_values]
        if missing:
            raise CapabilityError(f"custom source lacks required moments: {', '.join(missing)}")
        s2 = float(self.moment_values["sigma2"])
        zeta = float(self.moment_values["zeta"])
        var = zeta - s2 * s2
        return MomentSummary(sigma2=s2, zeta=zeta,
                             sixth=float(self.moment_values.get("sixth", math.inf)),
                             T=float(self.moment_values.get("T", math.nan)),
                             var_x2=var, dispersion=var / (4.0 * s2 * s2))

    def cgf_x2(self, theta):
        val = float(self.cgf(theta))
        return val if math.isfinite(val) else math.inf

    @property
    def theta_max(self):
        # doubling probe, then bisection onto the finiteness boundary
        lo = 0.0
        hi = 1.0 / self.sigma2
        for _ in range(64):
            if math.isinf(self.cgf_x2(hi)):
                break
            lo, hi = hi, 2.0 * hi
        else:
            return math.inf
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if math.isinf(self.cgf_x2(mid)):
                hi = mid
            else:
                lo = mid
        return hi

    def sample(self, rng, size):
        return np.asarray(self.sampler(rng, size), dtype=float)


def ternary_source(sigma2=1.0):
    """Ternary source on {a, 2a, 3a} with a^2 = 0.3 sigma2 and pmf (1/2, 1/3, 1/6)."""
    a = math.sqrt(0.3 * sigma2)
    return DiscreteSource(support=(a, 2 * a, 3 * a), pmf=(1 / 2, 1 / 3, 1 / 6))


# --------------------------------------------------------------------------
# Functional interface
# --------------------------------------------------------------------------

def moments(model):
    """Moment summary of ``X^2``; dispersion is ``Var[X^2] / (4 E[X^2]^2)``."""
    return model.moments()


def cgf_x2(model, theta):
    """``ln E[exp(theta X^2)]``, or ``inf`` outside the finiteness domain."""
    if theta == 0:
        return 0.0
    return model.cgf_x2(theta)


def _golden_max(f, lo, hi, rtol=1e-12):
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > rtol * max(abs(a), abs(b), 1e-300):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def legendre_x2(model, t):
    """Fenchel-Legendre transform of the CGF of ``X^2`` over ``theta >= 0``.

    The objective ``theta t - Lambda(theta)`` is concave. The search interval
    is ``[0, theta_max)``; for unbounded domains it is found by doubling.
    """
    t = float(t)
    s2 = model.sigma2
    if t <= s2:
        return LegendrePoint(t=t, theta_star=0.0, value=0.0)
    top = model.max_x2
    if t > top:
        return LegendrePoint(t=t, theta_star=math.inf, value=math.inf)
    if t == top:
        # sup is approached as theta -> inf: -ln Pr{X^2 = max}
        return LegendrePoint(t=t, theta_star=math.inf, value=-math.log(model.prob_max_x2()))

    def objective(theta):
        lam = model.cgf_x2(theta)
        return -math.inf if math.isinf(lam) else theta * t - lam

    theta_max = model.theta_max
    if math.isinf(theta_max):
        hi = 1.0 / s2
        while objective(2.0 * hi) > objective(hi):
            hi *= 2.0
        hi *= 2.0
    else:
        hi = theta_max * (1.0 - 1e-15)
    theta, value = _golden_max(objective, 0.0, hi)
    if not math.isinf(theta_max) and objective(hi) >= value:
        # supremum at the open boundary (steep case)
        theta, value = theta_max, objective(hi)
    return LegendrePoint(t=t, theta_star=theta, value=max(value, 0.0))


def sample_block(model, n, seed, stream=0):
    """Draw ``n`` i.i.d. symbols; deterministic in ``(seed, stream)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return model.sample(make_rng(seed, stream), n)


def sample_powers(model, n, size, rng, max_cells=4_000_000):
    """Draw ``size`` independent block powers ``Z = |X^n|^2 / n`` from ``rng``."""
    out = np.empty(size)
    rows = max(1, max_cells // n)
    for start in range(0, size, rows):
        m = min(rows, size - start)
        x = model.sample(rng, (m, n))
        out[start:start + m] = np.mean(x * x, axis=1)
    return out


def sample_power(model, n, seed, stream=0):
    """Power ``Z`` of one sampled block."""
    x = sample_block(model, n, seed, stream)
    return float(np.mean(x * x))


def power_density(model, n):
    """Exact law of ``Z`` as a :class:`PowerLaw`, or ``None`` when unavailable."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return model.power_law(n)


def source_from_config(cfg):
    """Build a source from a parsed JSON object; unknown keys are rejected."""
    allowed = {
        "discrete": {"kind", "support", "pmf"},
        "gaussian": {"kind", "variance"},
        "rayleigh": {"kind", "scale"},
    }
    if not isinstance(cfg, dict):
        raise ValidationError("source configuration must be a JSON object")
    kind = cfg.get("kind")
    if kind not in allowed:
        raise ValidationError(f"unknown source kind {kind!r}", field="kind")
    extra = sorted(set(cfg) - allowed[kind])
    if extra:
        raise ValidationError(f"unknown key(s) for {kind} source: {', '.join(extra)}", field=extra[0])
    missing = sorted(allowed[kind] - set(cfg))
    if missing:
        raise ValidationError(f"missing key(s) for {kind} source: {', '.join(missing)}", field=missing[0])
    try:
        if kind == "discrete":
            return DiscreteSource(support=tuple(cfg["support"]), pmf=tuple(cfg["pmf"]))
        if kind == "gaussian":
            return GaussianSource(variance=float(cfg["variance"]))
        return RayleighSource(scale=float(cfg["scale"]))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed {kind} source: {exc}") from exc
