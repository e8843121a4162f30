"""Special functions used throughout the package.

Every probability-valued routine has a ``log_`` twin that stays finite when
the probability underflows double precision. The shell probabilities at
blocklengths in the thousands are of order ``exp(-1000)``, so callers that
raise them to the power ``M = exp(n R)`` must work with the log forms.

All functions accept scalars or numpy arrays and return a ``float`` for
scalar input.
"""

import math

import numpy as np
from scipy import special as _sp

from .errors import DomainError

_EPS = 2.0 ** -52
_TINY = 1e-300
_MAX_ITER = 200_000
_LN2 = math.log(2.0)


def _out(arr):
    arr = np.asarray(arr)
    return float(arr) if arr.ndim == 0 else arr


def log1mexp(log_p):
    """Return ``log(1 - exp(log_p))`` for ``log_p <= 0`` without cancellation."""
    lp = np.asarray(log_p, dtype=float)
    with np.errstate(divide="ignore"):
        res = np.where(lp > -_LN2,
                       np.log(-np.expm1(np.minimum(lp, 0.0))),
                       np.log1p(-np.exp(np.minimum(lp, 0.0))))
    return _out(res)


def log_gamma(x):
    """Natural log of the Gamma function for ``x > 0``."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("log_gamma requires finite x > 0")
    return _out(_sp.gammaln(arr))


# --------------------------------------------------------------------------
# Regularized incomplete beta
# --------------------------------------------------------------------------

def _betacf(a, b, x):
    """Continued fraction of I_x(a, b) by the modified Lentz method."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        h = h * d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 4 * _EPS):
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def _stirling_err(x):
    """``ln Gamma(x) - [(x - 1/2) ln x - x + ln(2 pi) / 2]``."""
    x = np.asarray(x, dtype=float)
    big = x >= 10.0
    xb = np.where(big, x, 10.0)
    r = 1.0 / (xb * xb)
    series = (1.0 / 12 - r * (1.0 / 360 - r * (1.0 / 1260 - r * (1.0 / 1680 - r / 1188)))) / xb
    xs = np.where(big, 1.0, x)
    direct = _sp.gammaln(xs) - ((xs - 0.5) * np.log(xs) - xs + 0.5 * math.log(2.0 * math.pi))
    return np.where(big, series, direct)


def _log_beta_front(a, b, x, y):
    """``a ln x + b ln y - ln B(a, b)`` without the cancellation of large terms.

    Expanding about ``x0 = a / (a + b)`` turns the leading parts of
    ``ln B`` into ``a ln x0 + b ln y0`` analytically, leaving only the
    Stirling remainders.
    """
    t = a + b
    r1 = (b * x - a * y) / a  # x / x0 - 1
    r2 = (a * y - b * x) / b  # y / y0 - 1
    with np.errstate(divide="ignore"):
        l1 = np.where(np.abs(r1) < 0.5, np.log1p(r1), np.log(x) - np.log(a / t))
        l2 = np.where(np.abs(r2) < 0.5, np.log1p(r2), np.log(y) - np.log(b / t))
    return (a * l1 + b * l2 + 0.5 * np.log(a * b / (2.0 * math.pi * t))
            - _stirling_err(a) - _stirling_err(b) + _stirling_err(t))


def log_reg_inc_beta(a, b, x, y=None):
    """Log of the regularized incomplete beta function ``I_x(a, b)``.

    ``y`` may carry ``1 - x`` computed by the caller without cancellation;
    it matters when ``x`` is close to 1.
    """
    a, b, x = np.broadcast_arrays(np.asarray(a, dtype=float),
                                  np.asarray(b, dtype=float),
                                  np.asarray(x, dtype=float))
    y = 1.0 - x if y is None else np.broadcast_to(np.asarray(y, dtype=float), x.shape)
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise DomainError("incomplete beta requires a, b > 0")
    if np.any(~((x >= 0) & (x <= 1))) or np.any(~((y >= 0) & (y <= 1))):
        raise DomainError("incomplete beta requires 0 <= x <= 1")

    out = np.empty(x.shape)
    out[x == 0] = -np.inf
    out[(y == 0) & (x > 0)] = 0.0
    inner = (x > 0) & (y > 0)
    direct = inner & (x < a / (a + b))
    swap = inner & ~direct

    if np.any(direct):
        aa, bb, xx, yy = a[direct], b[direct], x[direct], y[direct]
        front = _log_beta_front(aa, bb, xx, yy)
        out[direct] = front - np.log(aa) + np.log(_betacf(aa, bb, xx))
    if np.any(swap):
        aa, bb, xx, yy = a[swap], b[swap], x[swap], y[swap]
        front = _log_beta_front(aa, bb, xx, yy)
        comp = front - np.log(bb) + np.log(_betacf(bb, aa, yy))
        out[swap] = log1mexp(np.minimum(comp, 0.0))
    return _out(out)


def reg_inc_beta(a, b, x):
    """Regularized incomplete beta ``I_x(a, b)``; ``I_0 = 0`` and ``I_1 = 1``."""
    return _out(np.exp(log_reg_inc_beta(a, b, x)))


# --------------------------------------------------------------------------
# Regularized incomplete gamma
# --------------------------------------------------------------------------

def _log_gamma_series(a, x):
    """log P(a, x) by the power series; intended for x < a + 1."""
    ap = a.copy()
    term = np.ones_like(x)
    total = np.ones_like(x)
    for _ in range(_MAX_ITER):
        ap = ap + 1.0
        term = term * x / ap
        total = total + term
        if np.all(term < total * _EPS):
            return a * np.log(x) - x - _sp.gammaln(a + 1.0) + np.log(total)
    raise RuntimeError("incomplete gamma series did not converge")


def _log_gamma_cf(a, x):
    """log Q(a, x) by Legendre's continued fraction; intended for x >= a + 1."""
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 4 * _EPS):
            return -x + a * np.log(x) - _sp.gammaln(a) + np.log(h)
    raise RuntimeError("incomplete gamma continued fraction did not converge")


def _inc_gamma_logs(a, x):
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    if np.any(~(a > 0)):
        raise DomainError("incomplete gamma requires a > 0")
    if np.any(~(x >= 0)):
        raise DomainError("incomplete gamma requires x >= 0")
    log_p = np.empty(x.shape)
    log_q = np.empty(x.shape)
    zero = x == 0
    log_p[zero] = -np.inf
    log_q[zero] = 0.0
    big = np.isinf(x)
    log_p[big] = 0.0
    log_q[big] = -np.inf
    ser = ~zero & ~big & (x < a + 1.0)
    cf = ~zero & ~big & ~ser
    if np.any(ser):
        lp = _log_gamma_series(a[ser], x[ser])
        log_p[ser] = lp
        log_q[ser] = log1mexp(np.minimum(lp, 0.0))
    if np.any(cf):
        lq = _log_gamma_cf(a[cf], x[cf])
        log_q[cf] = lq
        log_p[cf] = log1mexp(np.minimum(lq, 0.0))
    return log_p, log_q


def log_reg_inc_gamma_lower(a, x):
    """Log of ``P(a, x) = gamma(a, x) / Gamma(a)``."""
    return _out(_inc_gamma_logs(a, x)[0])


def log_reg_inc_gamma_upper(a, x):
    """Log of ``Q(a, x) = 1 - P(a, x)``, accurate deep in the upper tail."""
    return _out(_inc_gamma_logs(a, x)[1])


def reg_inc_gamma_lower(a, x):
    """Regularized lower incomplete gamma ``P(a, x)``."""
    return _out(np.exp(_inc_gamma_logs(a, x)[0]))


# --------------------------------------------------------------------------
# Gaussian tail
# --------------------------------------------------------------------------

def q_func(x):
    """Standard Gaussian complementary CDF."""
    return _out(_sp.ndtr(-np.asarray(x, dtype=float)))


def q_inv(p):
    """Inverse of :func:`q_func` on the open interval (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise DomainError("q_inv requires 0 < p < 1")
    return _out(-_sp.ndtri(arr))


# --------------------------------------------------------------------------
# Non-central chi-square
# --------------------------------------------------------------------------

_POISSON_RESIDUAL = 1e-14
_REL_RESIDUAL = -34.0  # log of the relative truncation target (about 1.7e-15)
_CHUNK_CELLS = 4_000_000


def _log_central_ladder(a, y, top):
    """log P(a + j, y) for j = 0..top via the downward recurrence.

    P(s, y) = P(s + 1, y) + y^s e^{-y} / Gamma(s + 1) only ever adds positive
    terms going down, so the ladder is stable in log space.
    """
    j = np.arange(top, dtype=float)
    steps = (a + j) * math.log(y) - y - _sp.gammaln(a + j + 1.0)
    head = log_reg_inc_gamma_lower(a + top, y)
    acc = np.logaddexp.accumulate(np.concatenate(([head], steps[::-1])))
    return acc[::-1]


def _log_poisson(j, mu):
    """log Poisson(mu) pmf on the integer grid j; rows follow mu."""
    mu = mu[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        lw = j[None, :] * np.log(mu) - mu - _sp.gammaln(j[None, :] + 1.0)
    return np.where(mu == 0, np.where(j[None, :] == 0, 0.0, -np.inf), lw)


def _log_poisson_tail_bound(top, mu):
    """Upper bound on log Pr{Poisson(mu) > top}, valid when top + 2 > mu."""
    k = top + 1.0
    with np.errstate(divide="ignore"):
        lw = k * np.log(mu) - mu - _sp.gammaln(k + 1.0)
        return np.where(mu == 0, -np.inf, lw - np.log1p(-mu / (k + 1.0)))


def log_noncentral_chi2_cdf(dof, lam, x):
    """Log CDF of a non-central chi-square with ``dof`` degrees of freedom.

    Evaluated as the Poisson(lam/2) mixture of central chi-square CDFs. The
    index window runs from 0 up past the Poisson mode until both the Poisson
    residual mass and its bound relative to the partial sum are negligible.
    ``lam`` may be an array; ``dof`` and ``x`` are scalars.
    """
    if dof < 1 or int(dof) != dof:
        raise DomainError("dof must be a positive integer")
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(~(lam_arr >= 0)) or not np.all(np.isfinite(lam_arr)):
        raise DomainError("non-centrality must be finite and >= 0")
    if not x >= 0:
        raise DomainError("x must be >= 0")
    flat = lam_arr.ravel()
    if x == 0:
        return _out(np.full(lam_arr.shape, -np.inf))
    if math.isinf(x):
        return _out(np.zeros(lam_arr.shape))

    a = dof / 2.0
    y = x / 2.0
    mu = flat / 2.0
    mu_max = float(mu.max()) if mu.size else 0.0
    top = int(math.ceil(mu_max + 12.0 * math.sqrt(mu_max) + 40.0))
    while True:
        ladder = _log_central_ladder(a, y, top)
        j = np.arange(top + 1, dtype=float)
        result = np.empty(mu.shape)
        rows = max(1, _CHUNK_CELLS // (top + 1))
        for start in range(0, mu.size, rows):
            block = mu[start:start + rows]
            result[start:start + rows] = _sp.logsumexp(_log_poisson(j, block) + ladder[None, :], axis=1)
        tail = _log_poisson_tail_bound(float(top), mu)
        ok = np.all(tail < math.log(_POISSON_RESIDUAL)) and np.all(tail + ladder[-1] < result + _REL_RESIDUAL)
        if ok:
            return _out(np.minimum(result, 0.0).reshape(lam_arr.shape))
        top *= 2


def noncentral_chi2_cdf(dof, lam, x):
    """CDF of the non-central chi-square distribution (see the log form)."""
    return _out(np.exp(log_noncentral_chi2_cdf(dof, lam, x)))
