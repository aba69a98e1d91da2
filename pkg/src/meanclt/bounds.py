"""Deterministic evaluation of explicit mean-CLT convergence bounds.

All conditional-expectation norms reduce to transfer-operator images of
explicit FourierFn observables and are integrated by deterministic
quadrature; nothing here is Monte Carlo, so bound values carry no
statistical error.  I.i.d. inputs short-circuit to their exact closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateVarianceError, DomainError, PreconditionError
from .fourier import FourierFn, constant_fn, lebesgue_inner, product
from .numerics import RandomStream, Tolerance, integrate_unit
from .processes import (IIDLaw, ProcessSpec, is_martingale, long_run_variance,
                        resolvent_tail, transfer)

_NORM_TOL = Tolerance(1e-12, 1e-12, 44)
_STABLE_EPS = 1e-16


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentSummary:
    """Moment ingredients of the bound formulas.

    lam is the third-moment ratio E|X0|^3 / sigma^2; sup_bound is a certified
    upper bound for ||X0||_inf (may be inf for unbounded laws).
    """

    sigma2: float
    var0: float
    abs3: float
    lam: float
    sup_bound: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def moments(spec: ProcessSpec, f: Optional[FourierFn] = None,
            tol: Tolerance = _NORM_TOL) -> MomentSummary:
    """Marginal and long-run moment summary of the observed process."""
    if isinstance(spec, IIDLaw):
        if spec.var <= 0.0:
            raise DegenerateVarianceError("iid law has zero variance")
        return MomentSummary(sigma2=spec.var, var0=spec.var, abs3=spec.abs3,
                             lam=spec.abs3 / spec.var, sup_bound=spec.sup)
    if not isinstance(f, FourierFn):
        raise TypeError("interval-map moments need a FourierFn observable")
    if not f.centered:
        raise PreconditionError("moments requires a centered observable")
    sigma2 = long_run_variance(spec, f).sigma2
    if sigma2 <= 0.0:
        raise DegenerateVarianceError("long-run variance is not positive")
    var0 = lebesgue_inner(f, f)
    abs3 = integrate_unit(lambda x: np.abs(f.eval(x)) ** 3, tol)
    # grid maximum plus a Lipschitz certificate gives a sup upper bound
    grid_n = max(4096, 64 * max(f.max_freq, 1))
    grid = (np.arange(grid_n) + 0.5) / grid_n
    sup_bound = float(np.abs(f.eval(grid)).max()) \
        + f.derivative_sup_bound() / (2.0 * grid_n)
    return MomentSummary(sigma2=sigma2, var0=var0, abs3=abs3,
                         lam=abs3 / sigma2, sup_bound=sup_bound)


# ---------------------------------------------------------------------------
# Conditional-drift norms
# ---------------------------------------------------------------------------


def _l1_norm(g: FourierFn, tol: Tolerance = _NORM_TOL) -> float:
    if g.is_zero():
        return 0.0
    return integrate_unit(lambda x: np.abs(g.eval(x)), tol)


def _weighted_l1(f: FourierFn, g: FourierFn, tol: Tolerance = _NORM_TOL) -> float:
    if g.is_zero():
        return 0.0
    return integrate_unit(lambda x: np.abs(f.eval(x) * g.eval(x)), tol)


class _DriftSeries:
    """Incremental partial sums sum_{k=1}^m K^k z for a centered z.

    Detects stabilization (increments below 1e-16 in coefficient l1) so that
    long bound series reuse cached norms instead of re-integrating.
    """

    def __init__(self, spec: ProcessSpec, z: FourierFn):
        self.spec = spec
        self.current = z  # K^m z once advanced
        self.partial = constant_fn(0.0)
        self.m = 0
        self.stable = False

    def advance(self) -> FourierFn:
        """Move to m+1; returns the partial sum sum_{k<=m} K^k z."""
        if not self.stable:
            self.current = transfer(self.spec, self.current, 1)
            if self.current.coeff_l1() <= _STABLE_EPS * (1.0 + self.partial.coeff_l1()):
                self.stable = True
            else:
                self.partial = self.partial + self.current
        self.m += 1
        return self.partial


def variance_drift_norms(spec: ProcessSpec, f: Optional[FourierFn], m: int,
                         tol: Tolerance = _NORM_TOL) -> tuple[float, float]:
    """(||U_m||_1, ||X0 U_m||_1) for U_m = E_0(X_1^2+...+X_m^2) - m Var X0.

    Requires a martingale-difference observable.
    """
    if m < 1:
        raise DomainError("m must be >= 1")
    if isinstance(spec, IIDLaw):
        return (0.0, 0.0)
    if not is_martingale(spec, f):
        raise PreconditionError("variance_drift_norms requires a martingale difference")
    f2, _ = product(f, f)
    series = _DriftSeries(spec, f2.shift_constant(-lebesgue_inner(f, f)))
    for _ in range(m):
        u = series.advance()
    return (_l1_norm(u, tol), _weighted_l1(f, u, tol))


def projective_drift_norms(spec: ProcessSpec, f: Optional[FourierFn], m: int,
                           tol: Tolerance = _NORM_TOL) -> tuple[float, float]:
    """(||W_m||_1, ||X0 W_m||_1) for the centered compensator

        Z0 = X0^2 - sigma^2 + 2 X0 sum_{l>=1} E_0(X_l),
        W_m = E_0(Z_1 + ... + Z_m).
    """
    if m < 1:
        raise DomainError("m must be >= 1")
    if isinstance(spec, IIDLaw):
        return (0.0, 0.0)
    z = _compensator(spec, f)
    series = _DriftSeries(spec, z)
    for _ in range(m):
        w = series.advance()
    return (_l1_norm(w, tol), _weighted_l1(f, w, tol))


def _compensator(spec: ProcessSpec, f: FourierFn) -> FourierFn:
    sigma2 = long_run_variance(spec, f).sigma2
    g_tail = resolvent_tail(spec, f, 1)
    fg, _ = product(f, g_tail)
    f2, _ = product(f, f)
    return (f2 + 2.0 * fg).shift_constant(-sigma2)


@dataclass(frozen=True)
class CorrectionReport:
    """Non-adapted first-order correction with its per-m breakdown."""

    total: float
    tail_terms: tuple
    drift_terms: tuple


def nonadapted_correction(spec: ProcessSpec, f: Optional[FourierFn], n: int,
                          tol: Tolerance = _NORM_TOL) -> CorrectionReport:
    """sum_m (sigma sqrt m)^{-1} || X0 sum_{l>=m} E_0(X_l) ||_1
       + sum_m (2m)^{-1} || (1 + X0^2/sigma^2) E_0(S_m) ||_1, for m = 1..n.

    Vanishes identically for martingale differences and i.i.d. inputs.  Once
    the underlying conditional functions stabilize, the remaining weights are
    summed against the cached norm.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if isinstance(spec, IIDLaw):
        return CorrectionReport(0.0, (), ())
    mom = moments(spec, f)
    sigma, sigma2 = mom.sigma, mom.sigma2

    tail_terms = []
    first = 0.0
    prev_norm = None
    for m in range(1, n + 1):
        tail_m = resolvent_tail(spec, f, m)
        if tail_m.is_zero():
            # all later tails vanish as well for the interval maps
            break
        norm = _weighted_l1(f, tail_m, tol)
        if prev_norm is not None and norm <= _STABLE_EPS * (1.0 + prev_norm):
            break
        term = norm / (sigma * math.sqrt(m))
        tail_terms.append(term)
        first += term
        prev_norm = norm

    f2, _ = product(f, f)
    one_plus = f2 * (1.0 / sigma2) + constant_fn(1.0)
    series = _DriftSeries(spec, f)
    drift_terms = []
    second = 0.0
    cached_norm = None
    for m in range(1, n + 1):
        s_m = series.advance()
        if series.stable and cached_norm is not None:
            norm = cached_norm
        else:
            prod_fn, _ = product(one_plus, s_m)
            norm = _l1_norm(prod_fn, tol)
            if series.stable:
                cached_norm = norm
        term = norm / (2.0 * m)
        drift_terms.append(term)
        second += term
    return CorrectionReport(total=first + second, tail_terms=tuple(tail_terms),
                            drift_terms=tuple(drift_terms))


# ---------------------------------------------------------------------------
# Bound reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    """Term-by-term evaluation of a distance bound at sample size n.

    total = constant + log_term + sum(series) (+ correction); the series has
    exactly m_cutoff = floor(sqrt(2n)) entries.
    """

    kind: str
    n: int
    total: float
    constant: float
    log_term: float
    series: tuple
    m_cutoff: int
    correction: float = 0.0

    def terms(self) -> dict:
        return {"constant": self.constant, "log": self.log_term,
                "series": float(sum(self.series)), "correction": self.correction}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "total": self.total,
                "constant": self.constant, "log_term": self.log_term,
                "series": list(self.series), "m_cutoff": self.m_cutoff,
                "correction": self.correction}

    def csv_row(self) -> str:
        return ",".join(repr(v) for v in
                        (self.n, self.total, self.constant, self.log_term,
                         float(sum(self.series)), self.correction))


def _base_terms(mom: MomentSummary, n: int) -> tuple[float, float, int]:
    constant = 13.0 * mom.sigma / 6.0
    log_term = mom.lam / 6.0 * math.log1p(2.0 * n)
    return constant, log_term, int(math.isqrt(2 * n))


def martingale_d1_bound(spec: ProcessSpec, f: Optional[FourierFn], n: int,
                        tol: Tolerance = _NORM_TOL) -> BoundReport:
    """Distance bound for stationary martingale differences:

        13 sigma/6 + (Lambda/6) log(1+2n)
        + sum_{m<=sqrt(2n)} (||X0 U_m||_1 + 2 sigma ||U_m||_1)/(m sigma^2).
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    mom = moments(spec, f)
    constant, log_term, cutoff = _base_terms(mom, n)
    series = []
    if isinstance(spec, IIDLaw):
        series = [0.0] * cutoff
    else:
        if not is_martingale(spec, f):
            raise PreconditionError("martingale_d1_bound requires a martingale difference")
        f2, _ = product(f, f)
        drift = _DriftSeries(spec, f2.shift_constant(-mom.var0))
        cached = None
        for m in range(1, cutoff + 1):
            u = drift.advance()
            if drift.stable and cached is not None:
                l1, wl1 = cached
            else:
                l1, wl1 = _l1_norm(u, tol), _weighted_l1(f, u, tol)
                if drift.stable:
                    cached = (l1, wl1)
            series.append((wl1 + 2.0 * mom.sigma * l1) / (m * mom.sigma2))
    total = constant + log_term + float(sum(series))
    return BoundReport(kind="martingale", n=n, total=total, constant=constant,
                       log_term=log_term, series=tuple(series), m_cutoff=cutoff)


def projective_d1_bound(spec: ProcessSpec, f: Optional[FourierFn], n: int,
                        tol: Tolerance = _NORM_TOL) -> BoundReport:
    """Distance bound for stationary sequences with a convergent resolvent:

        13 sigma/6 + (Lambda/6) log(1+2n)
        + sum_{m<=sqrt(2n)} (||X0 W_m||_1 + 2 sigma ||W_m||_1)/(m sigma^2)
        + nonadapted correction.

    Coincides with the martingale bound (correction 0, W_m = U_m) on
    martingale-difference inputs.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    mom = moments(spec, f)
    constant, log_term, cutoff = _base_terms(mom, n)
    if isinstance(spec, IIDLaw):
        series = [0.0] * cutoff
        corr = 0.0
    else:
        drift = _DriftSeries(spec, _compensator(spec, f))
        series = []
        cached = None
        for m in range(1, cutoff + 1):
            w = drift.advance()
            if drift.stable and cached is not None:
                l1, wl1 = cached
            else:
                l1, wl1 = _l1_norm(w, tol), _weighted_l1(f, w, tol)
                if drift.stable:
                    cached = (l1, wl1)
            series.append((wl1 + 2.0 * mom.sigma * l1) / (m * mom.sigma2))
        corr = nonadapted_correction(spec, f, n, tol).total
    total = constant + log_term + float(sum(series)) + corr
    return BoundReport(kind="projective", n=n, total=total, constant=constant,
                       log_term=log_term, series=tuple(series), m_cutoff=cutoff,
                       correction=corr)


def second_moment_norms(spec: ProcessSpec, f: Optional[FourierFn], m: int,
                        tol: Tolerance = _NORM_TOL) -> tuple[float, float]:
    """(||E_0(S_m^2) - m sigma^2||_1, ||E_0(J_m)||_1) for bounded observables.

    E_0(S_m^2) expands into transfer images of f^2 and of the lagged products
    f * K^(l-k) f; J_m is the m-step smoothing of the resolvent limit.
    """
    if m < 1:
        raise DomainError("m must be >= 1")
    if isinstance(spec, IIDLaw):
        return (0.0, 0.0)
    mom = moments(spec, f)
    f2, _ = product(f, f)
    total = constant_fn(-m * mom.sigma2)
    lag_fn = {}
    for k in range(1, m + 1):
        total = total + transfer(spec, f2, k)
    for k in range(1, m + 1):
        for l in range(k + 1, m + 1):
            d = l - k
            if d not in lag_fn:
                lag_fn[d], _ = product(f, transfer(spec, f, d))
            total = total + 2.0 * transfer(spec, lag_fn[d], k)
    g_tail = resolvent_tail(spec, f, 1)
    j_m = transfer(spec, g_tail, m)
    return (_l1_norm(total, tol), _l1_norm(j_m, tol))


def variance_l32_norm(spec: ProcessSpec, f: Optional[FourierFn], l: int,
                      tol: Tolerance = _NORM_TOL) -> float:
    """|| E_0(X_l^2) - Var X0 ||_{3/2} for a martingale-difference observable."""
    if l < 1:
        raise DomainError("l must be >= 1")
    if isinstance(spec, IIDLaw):
        return 0.0
    if not is_martingale(spec, f):
        raise PreconditionError("variance_l32_norm requires a martingale difference")
    f2, _ = product(f, f)
    g = transfer(spec, f2, l).shift_constant(-lebesgue_inner(f, f))
    if g.is_zero():
        return 0.0
    return integrate_unit(lambda x: np.abs(g.eval(x)) ** 1.5, tol) ** (2.0 / 3.0)


def cubic_moment_sum(spec: ProcessSpec, f: Optional[FourierFn], l: int,
                     tol: Tolerance = _NORM_TOL) -> float:
    """Third-moment matching target of a length-l dependency window:

        E(X0^3) + 3 sum_{i<=l} E(X0 X_i^2 + X0^2 X_i)
                + 6 sum_{i<=l} sum_{j<i} E(X0 X_j X_i).

    Stabilizes exactly for the doubling map once 2^l exceeds max_freq.
    """
    if l < 0:
        raise DomainError("l must be >= 0")
    if isinstance(spec, IIDLaw):
        return spec.third
    f2, _ = product(f, f)
    f3, _ = product(f2, f)
    total = f3.mean
    for i in range(1, l + 1):
        total += 3.0 * lebesgue_inner(f, transfer(spec, f2, i))
        total += 3.0 * lebesgue_inner(f2, transfer(spec, f, i))
        for j in range(1, i):
            inner, _ = product(f, transfer(spec, f, i - j))
            total += 6.0 * lebesgue_inner(f, transfer(spec, inner, j))
    return total


# ---------------------------------------------------------------------------
# Three-moment matching distribution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThreeMomentDist:
    """Gaussian-plus-two-point law with prescribed moments (0, beta2, beta3).

    The law is Z + B with Z ~ N(0, beta2/2) independent of the two-point B
    taking value m with probability t and m_prime with probability 1 - t.
    """

    beta2: float
    beta3: float
    m: float
    m_prime: float
    t: float

    def sample(self, stream: RandomStream, size: int) -> np.ndarray:
        gen = stream.generator()
        z = gen.standard_normal(size) * math.sqrt(self.beta2 / 2.0)
        b = np.where(gen.random(size) < self.t, self.m, self.m_prime)
        return z + b

    def analytic_moments(self) -> tuple[float, float, float]:
        """Exact (mean, variance, third moment) of the law.

        The complement 1 - t is recovered from the centering identity
        t m + (1-t) m' = 0 so heavy-weight cases keep full precision.
        """
        t, m, mp = self.t, self.m, self.m_prime
        one_minus_t = t * m / (-mp)
        eb = t * m + one_minus_t * mp
        eb2 = t * m * m + one_minus_t * mp * mp
        eb3 = t * m ** 3 + one_minus_t * mp ** 3
        return (eb, self.beta2 / 2.0 + eb2, eb3)


def three_moment_distribution(beta2: float, beta3: float) -> ThreeMomentDist:
    """Construct the matching law: m = (beta3 + sqrt(beta3^2 + beta2^3/2))/beta2,
    m' = -beta2/(2m), t = beta2^3 / (2 beta2^3 + 4 beta3 (beta3 + sqrt(...))).

    For beta3 < 0 the sum beta3 + root is evaluated through its conjugate
    beta2^3 / (2 (root - beta3)) to avoid cancellation.
    """
    if beta2 <= 0.0:
        raise DomainError("beta2 must be positive")
    root = math.sqrt(beta3 * beta3 + beta2 ** 3 / 2.0)
    s = beta3 + root if beta3 >= 0.0 else beta2 ** 3 / (2.0 * (root - beta3))
    m = s / beta2
    m_prime = -beta2 * beta2 / (2.0 * s)
    t = beta2 ** 3 / (2.0 * beta2 ** 3 + 4.0 * beta3 * s)
    return ThreeMomentDist(beta2=beta2, beta3=beta3, m=m, m_prime=m_prime, t=t)


# ---------------------------------------------------------------------------
# Classical i.i.d. reference bound and rate fitting
# ---------------------------------------------------------------------------


def zolotarev_bound(abs3: float, var: float) -> float:
    """Upper bound E|X|^3 / (2 sigma^2) for the i.i.d. limit constant."""
    if var <= 0.0:
        raise DomainError("variance must be positive")
    return abs3 / (2.0 * var)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float


def rate_fit(points: Sequence[tuple[int, float]]) -> RateFit:
    """Least squares of log d against log n over (n, d) pairs."""
    if len(points) < 3:
        raise DomainError("rate fitting needs at least 3 points")
    ns = np.array([p[0] for p in points], dtype=float)
    ds = np.array([p[1] for p in points], dtype=float)
    if np.unique(ns).size != ns.size:
        raise DomainError("sample sizes must be distinct")
    if np.any(ds <= 0.0):
        raise DomainError("distances must be positive for a log-log fit")
    x, y = np.log(ns), np.log(ds)
    xbar, ybar = x.mean(), y.mean()
    sxx = float(((x - xbar) ** 2).sum())
    sxy = float(((x - xbar) * (y - ybar)).sum())
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    syy = float(((y - ybar) ** 2).sum())
    r2 = 1.0 if syy == 0.0 else 1.0 - float((resid ** 2).sum()) / syy
    return RateFit(slope=slope, intercept=intercept, r2=r2)
