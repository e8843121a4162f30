"""Ensemble excess-distortion probability ``P_e = E[(1 - P(n, Z))^M]``.

Averaging over the random codebook leaves an expectation over the block
power ``Z`` alone, so three estimators are offered: Monte Carlo over ``Z``
(conditional), numerical integration against the exact law of ``Z``
(quadrature), and brute-force simulation of random codebooks with
minimum-distance encoding (direct).

Every probability is carried as a log value as well, because at moderate
blocklengths ``P_e`` routinely sits far below the smallest double.
"""

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from . import specfun
from .asymptotics import dispersion, rd_function
from .distortion import CodebookKind, DistortionSetup
from .errors import CapabilityError, DegenerateSourceError, DomainError, ResourceError
from .shellprob import log_psi_spherical, log_upsilon_iid
from .sources import make_rng, power_density, sample_powers

MAX_DIRECT_CODEWORDS = 2 ** 20
_CHUNK = 4096  # samples per RNG stream; fixed so results ignore worker count
_CELLS = 4_000_000
_CUT = 50.0  # log-units below the peak treated as negligible in quadrature


class EstimateMethod(str, enum.Enum):
    CONDITIONAL = "conditional"
    QUADRATURE = "quadrature"
    DIRECT = "direct"


@dataclass(frozen=True)
class EnsembleEstimate:
    """Point estimate of the ensemble excess-distortion probability.

    ``underflow`` is set when ``log_value`` is finite but ``value`` rounds
    to zero in double precision.
    """

    value: float
    log_value: float
    std_error: float
    method: EstimateMethod
    n: int
    log_m: float
    kind: CodebookKind
    seed: int
    samples: int = 0

    @property
    def underflow(self):
        return self.value == 0.0 and math.isfinite(self.log_value)


@dataclass(frozen=True)
class SimPlan:
    n: int
    log_m: float
    kind: CodebookKind = CodebookKind.SPHERICAL
    samples: int = 100_000
    seed: int = 0
    worker_streams: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", CodebookKind(self.kind))
        if int(self.n) != self.n or self.n < 1:
            raise DomainError("n must be a positive integer")
        if self.kind is CodebookKind.SPHERICAL and self.n < 2:
            raise DomainError("spherical codebooks need n >= 2")
        if not (self.log_m >= 0 and math.isfinite(self.log_m)):
            raise DomainError("log_m must be finite and non-negative")
        if self.samples < 100:
            raise DomainError("samples must be at least 100")
        if self.worker_streams < 1:
            raise DomainError("worker_streams must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must be an unsigned 64-bit integer")


class MDPoint(NamedTuple):
    n: int
    measured: float
    xi: float
    log_m: float
    log_pe: float


# --------------------------------------------------------------------------
# Shared pieces
# --------------------------------------------------------------------------

def log_cover(setup, n, z, kind):
    """Log single-codeword cover probability, vectorized, accepting ``z = 0``.

    A zero-power block sits at distance exactly ``p_y`` from every spherical
    codeword, so it is covered iff ``p_y <= D``.
    """
    z = np.asarray(z, dtype=float)
    if CodebookKind(kind) is CodebookKind.IID:
        return log_upsilon_iid(setup, n, z)
    out = np.full(z.shape, 0.0 if setup.p_y <= setup.D else -np.inf)
    pos = z > 0
    if np.any(pos):
        out[pos] = log_psi_spherical(setup, n, z[pos])
    return specfun._out(out)


def log_excess_given_cover(log_p, log_m):
    """``log((1 - P)^M)`` with ``M = exp(log_m)``, never forming ``M`` itself."""
    log_p = np.asarray(log_p, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        # log(-log(1 - P)); for tiny P it is log P + P/2 to double precision,
        # which keeps M * P meaningful after P itself has underflowed
        log_neg = np.where(log_p < -20.0, log_p + 0.5 * np.exp(log_p),
                           np.log(-np.asarray(specfun.log1mexp(np.minimum(log_p, 0.0)))))
        out = -np.exp(log_m + log_neg)
    return specfun._out(np.where(np.isneginf(log_p), 0.0, out))


def _check_kind_n(n, kind):
    kind = CodebookKind(kind)
    if kind is CodebookKind.SPHERICAL and n < 2:
        raise DomainError("spherical codebooks need n >= 2")
    return kind


def _estimate_from_logs(log_terms, method, n, log_m, kind, seed):
    count = log_terms.size
    log_value = float(logsumexp(log_terms) - math.log(count))
    peak = float(np.max(log_terms))
    if math.isinf(peak):
        std = 0.0
    else:
        scaled = np.exp(log_terms - peak)
        std = float(np.std(scaled, ddof=1) / math.sqrt(count) * math.exp(peak))
    return EnsembleEstimate(value=min(1.0, math.exp(log_value)), log_value=min(0.0, log_value),
                            std_error=std, method=method, n=n, log_m=log_m, kind=kind,
                            seed=seed, samples=count)


def _run_chunks(fn, count, chunk, workers):
    """Apply ``fn(stream, size)`` over fixed chunks and concatenate in stream order."""
    jobs = [(k, min(chunk, count - k * chunk)) for k in range(math.ceil(count / chunk))]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: fn(*job), jobs))
    else:
        parts = [fn(*job) for job in jobs]
    return np.concatenate(parts)


# --------------------------------------------------------------------------
# Estimators
# --------------------------------------------------------------------------

def pe_conditional(model, setup, plan):
    """Monte Carlo over ``Z`` of ``(1 - P(n, Z))^M``; the codebook is averaged analytically."""

    def chunk(stream, size):
        z = sample_powers(model, plan.n, size, make_rng(plan.seed, stream))
        return np.atleast_1d(log_excess_given_cover(log_cover(setup, plan.n, z, plan.kind), plan.log_m))

    logs = _run_chunks(chunk, plan.samples, _CHUNK, plan.worker_streams)
    return _estimate_from_logs(logs, EstimateMethod.CONDITIONAL, plan.n, plan.log_m, plan.kind, plan.seed)


def _log_integral(log_f, a, b, grid=2001, max_rounds=60):
    """``log int_a^b exp(log_f)`` to relative accuracy.

    Repeated grid passes zoom in on the region within ``_CUT`` of the peak
    until the peak is resolved (neighbouring grid values within one
    log-unit of it), and that region is then integrated adaptively after
    normalizing by the peak.
    """
    lo, hi = a, b
    peak, z_peak = -math.inf, None
    for _ in range(max_rounds):
        zs = lo + (hi - lo) * (np.arange(grid) + 0.5) / grid
        lf = np.asarray(log_f(zs), dtype=float)
        k = int(np.argmax(lf))
        if lf[k] >= peak:
            peak, z_peak = float(lf[k]), float(zs[k])
        if math.isinf(peak):
            return -math.inf
        step = (hi - lo) / grid
        keep = zs[lf > peak - _CUT]
        left = min(keep[0], z_peak) if keep.size else z_peak
        right = max(keep[-1], z_peak) if keep.size else z_peak
        lo, hi = max(a, left - step), min(b, right + step)
        near = lf[max(k - 1, 0):k + 2]
        if zs[k] == z_peak and np.all(peak - near <= 1.0):
            break

    top = [peak]

    def integrand(z):
        v = float(log_f(np.array([z]))[0])
        top[0] = max(top[0], v)
        return math.exp(min(v - peak, 700.0))

    points = [z_peak] if lo < z_peak < hi else None
    for _ in range(5):
        val, _err = integrate.quad(integrand, lo, hi, points=points, epsabs=0.0, epsrel=1e-10, limit=1000)
        if top[0] <= peak + 30.0:
            break
        peak = top[0]
    return peak + math.log(val) if val > 0 else -math.inf


def pe_quadrature(model, setup, plan):
    """Integrate ``(1 - P(n, z))^M f_Z(z)`` against the exact Gamma law of ``Z``.

    For the spherical codebook the blocks with ``sqrt z`` outside
    ``[r1, r2]`` are never covered and enter as the exact boundary masses
    ``Pr{Z < r1^2} + Pr{Z > r2^2}``. Accuracy is relative, so values far
    below machine epsilon are still resolved through ``log_value``.
    """
    law = power_density(model, plan.n)
    if law is None:
        raise CapabilityError("analytic law of the block power is unavailable for this source")
    n, kind, log_m = plan.n, plan.kind, plan.log_m

    def log_f(z):
        return log_excess_given_cover(log_cover(setup, n, z, kind), log_m) + law.logpdf(z)

    parts = []
    if kind is CodebookKind.SPHERICAL:
        a = setup.r1_sq if setup.r1 > 0 else 0.0
        if setup.r1 > 0:
            parts.append(float(law.logcdf(setup.r1_sq)))
        parts.append(float(law.logsf(setup.r2_sq)))
        parts.append(_log_integral(log_f, a, setup.r2_sq))
    else:
        b = 2.0 * law.mean
        while True:
            inner = _log_integral(log_f, 0.0, b)
            if float(law.logsf(b)) < inner - _CUT:
                break
            b *= 2.0
        parts.append(_log_integral(log_f, 0.0, b))
    log_value = min(0.0, float(logsumexp(parts)))
    return EnsembleEstimate(value=math.exp(log_value), log_value=log_value, std_error=0.0,
                            method=EstimateMethod.QUADRATURE, n=n, log_m=log_m, kind=kind,
                            seed=plan.seed, samples=0)


def spherical_floor(model, setup, n):
    """``Pr{Z < r1^2} + Pr{Z > r2^2}`` (log), the part of ``P_e`` no codebook size removes."""
    law = power_density(model, n)
    if law is None:
        raise CapabilityError("analytic law of the block power is unavailable for this source")
    parts = [float(law.logsf(setup.r2_sq))]
    if setup.r1 > 0:
        parts.append(float(law.logcdf(setup.r1_sq)))
    return float(logsumexp(parts))


def _codebook(rng, size, m_count, n, p_y, kind):
    y = rng.standard_normal((size, m_count, n))
    if kind is CodebookKind.SPHERICAL:
        y *= math.sqrt(n * p_y) / np.linalg.norm(y, axis=2, keepdims=True)
    else:
        y *= math.sqrt(p_y)
    return y


def pe_direct(model, setup, n, m_count, trials, seed=0, kind=CodebookKind.SPHERICAL, workers=1):
    """Brute-force estimate: fresh codebook and source block per trial, minimum-distance encoding."""
    kind = _check_kind_n(n, kind)
    if int(m_count) != m_count or m_count < 1:
        raise DomainError("m_count must be a positive integer")
    if m_count > MAX_DIRECT_CODEWORDS:
        raise ResourceError(f"m_count {m_count} exceeds the brute-force limit {MAX_DIRECT_CODEWORDS}")
    if trials < 2:
        raise DomainError("trials must be at least 2")
    per_trial = m_count * n
    chunk = max(1, min(_CHUNK, _CELLS // per_trial))

    def run(stream, size):
        rng = make_rng(seed, stream)
        x = model.sample(rng, (size, n))
        y = _codebook(rng, size, m_count, n, setup.p_y, kind)
        d = (np.sum(x * x, axis=1)[:, None] + np.sum(y * y, axis=2)
             - 2.0 * np.einsum("tn,tmn->tm", x, y)) / n
        return (np.min(d, axis=1) > setup.D).astype(float)

    hits = _run_chunks(run, int(trials), chunk, workers)
    p = float(np.mean(hits))
    std = math.sqrt(p * (1.0 - p) / hits.size)
    return EnsembleEstimate(value=p, log_value=math.log(p) if p > 0 else -math.inf, std_error=std,
                            method=EstimateMethod.DIRECT, n=n, log_m=math.log(m_count), kind=kind,
                            seed=seed, samples=hits.size)


def md_probe(model, setup, t_exponent, n_grid, seed=0, kind=CodebookKind.SPHERICAL, samples=100_000):
    """Normalized exponents ``-ln P_e / (n xi_n^2)`` for rate back-off ``xi_n = n^-t``.

    The back-off must vanish slower than ``sqrt(ln n / n)``, hence
    ``0 < t < 1/2``. Quadrature is used when the law of ``Z`` is known,
    otherwise the conditional estimator.
    """
    if not 0.0 < t_exponent < 0.5:
        raise DomainError("t_exponent must lie in (0, 1/2) so that the back-off vanishes slower than n^-1/2")
    m = model.moments()
    if dispersion(m.sigma2, m.zeta) <= 0:
        raise DegenerateSourceError("moderate-deviations probe needs positive dispersion")
    r0 = rd_function(setup.sigma2, setup.D)
    out = []
    for n in n_grid:
        xi = float(n) ** -t_exponent
        plan = SimPlan(n=int(n), log_m=n * (r0 + xi), kind=kind, samples=samples, seed=seed)
        if power_density(model, plan.n) is not None:
            est = pe_quadrature(model, setup, plan)
        else:
            est = pe_conditional(model, setup, plan)
        out.append(MDPoint(n=int(n), measured=-est.log_value / (n * xi * xi), xi=xi,
                           log_m=plan.log_m, log_pe=est.log_value))
    return out
