"""Stationary process definitions and exact transfer-operator machinery.

Four process families are supported:

* ``DoublingMap`` -- the dyadic Markov chain on [0,1) whose kernel averages
  the two inverse branches of x -> 2x mod 1; invariant law is Lebesgue.
* ``CircleWalk`` -- the symmetric +/-a random walk on the circle for an
  irrational step a; invariant law is Lebesgue.
* ``FiniteChain`` -- a finite-state chain given by a row-stochastic matrix,
  observed through a state-to-value map (no Fourier representation).
* ``IIDLaw`` -- an i.i.d. sequence sampled directly; the observable is the
  identity and moments are carried explicitly.

For the two interval maps the one-step conditional expectation operator K
acts exactly on FourierFn coefficients, which is what every bound evaluation
downstream relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import DegenerateVarianceError, DivergenceError, DomainError, PreconditionError
from .fourier import FourierFn, constant_fn, lebesgue_inner
from .numerics import substream

MARTINGALE_TOL = 1e-14
_VARIANCE_FLOOR = -1e-12

# ---------------------------------------------------------------------------
# High/low split representation of the walk step a
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitReal:
    """A real number stored as an exact double pair hi + lo with |lo| <= ulp(hi).

    Keeps fractional parts {k*a} accurate for k up to ~2^20, which plain
    double arithmetic cannot do.
    """

    hi: float
    lo: float = 0.0

    @property
    def value(self) -> float:
        return self.hi + self.lo

    def as_fraction(self) -> Fraction:
        return Fraction(self.hi) + Fraction(self.lo)

    @classmethod
    def from_fraction(cls, fr: Fraction) -> "SplitReal":
        hi = float(fr)
        lo = float(fr - Fraction(hi))
        return cls(hi, lo)


def sqrt2_minus_one() -> SplitReal:
    """sqrt(2) - 1 to ~1e-32, via integer square root."""
    scale = 1 << 220
    num = isqrt(2 * scale * scale)
    return SplitReal.from_fraction(Fraction(num, scale) - 1)


def _continued_fraction_guard(a: float, max_den: int = 10 ** 6, tol: float = 1e-15) -> None:
    """Reject step sizes indistinguishable from a small-denominator rational."""
    x = a
    p0, q0, p1, q1 = 0, 1, 1, 0
    for _ in range(64):
        n = math.floor(x)
        p0, q0, p1, q1 = p1, q1, n * p1 + p0, n * q1 + q0
        if q1 > max_den:
            return
        if q1 > 0 and abs(a - p1 / q1) < tol:
            raise DomainError(
                f"step {a!r} is within {tol:g} of the rational {p1}/{q1}; "
                "an irrational step is required")
        frac = x - n
        if frac <= 0.0:
            raise DomainError(f"step {a!r} is exactly rational")
        x = 1.0 / frac


def exact_frac(a: Union[SplitReal, float], k: int) -> float:
    """Exact fractional part {k*a}, rounded once to double at the end."""
    fr = a.as_fraction() if isinstance(a, SplitReal) else Fraction(float(a))
    num, den = fr.numerator, fr.denominator
    return float(Fraction((k * num) % den, den))


def dist_to_integers(a: Union[SplitReal, float], k: int) -> float:
    """Distance d(k*a, Z) computed through the exact fractional part."""
    f = exact_frac(a, k)
    return min(f, 1.0 - f)


# ---------------------------------------------------------------------------
# Process specifications
# ---------------------------------------------------------------------------


class ProcessSpec:
    """Marker base class; concrete variants are frozen dataclasses."""

    label: str = "process"

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class DoublingMap(ProcessSpec):
    label: str = field(default="doubling_map", init=False)

    def to_dict(self) -> dict:
        return {"type": "doubling_map"}


@dataclass(frozen=True, eq=False)
class CircleWalk(ProcessSpec):
    a: SplitReal
    label: str = field(default="circle_walk", init=False)

    def __post_init__(self):
        a = self.a
        if isinstance(a, (int, float)):
            a = SplitReal(float(a))
            object.__setattr__(self, "a", a)
        if not 0.0 < a.value < 1.0:
            raise DomainError("circle-walk step must lie in (0,1)")
        _continued_fraction_guard(a.value)

    def cos_step(self, k: int) -> float:
        """cos(2*pi*k*a) from the exact fractional part of k*a."""
        return math.cos(2.0 * math.pi * exact_frac(self.a, k))

    def sin_sq_half_step(self, k: int) -> float:
        """(1 - cos(2*pi*k*a))/2 = sin^2(pi*{k*a}), computed without cancellation."""
        return math.sin(math.pi * exact_frac(self.a, k)) ** 2

    def to_dict(self) -> dict:
        return {"type": "circle_walk", "a_hi": self.a.hi, "a_lo": self.a.lo}


@dataclass(frozen=True, eq=False)
class FiniteChain(ProcessSpec):
    transition: np.ndarray
    values: np.ndarray
    stationary: Optional[np.ndarray] = None
    label: str = field(default="finite_chain", init=False)

    def __post_init__(self):
        p = np.asarray(self.transition, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise DomainError("transition matrix must be square")
        if v.shape != (p.shape[0],):
            raise DomainError("values must map each state to one real")
        if np.any(p < -1e-15):
            raise DomainError("transition probabilities must be nonnegative")
        if np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-12:
            raise DomainError("transition rows must sum to 1 within 1e-12")
        pi = self.stationary
        if pi is None:
            w, vecs = np.linalg.eig(p.T)
            idx = int(np.argmin(np.abs(w - 1.0)))
            pi = np.real(vecs[:, idx])
            pi = pi / pi.sum()
        pi = np.asarray(pi, dtype=float)
        if np.max(np.abs(pi @ p - pi)) > 1e-12:
            raise DomainError("stationary vector does not satisfy pi P = pi within 1e-12")
        if abs(pi.sum() - 1.0) > 1e-12 or np.any(pi < -1e-13):
            raise DomainError("stationary vector must be a probability vector")
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "stationary", pi)
        for arr in (self.transition, self.values, self.stationary):
            arr.setflags(write=False)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    def to_dict(self) -> dict:
        return {"type": "finite_chain",
                "transition": self.transition.tolist(),
                "stationary": self.stationary.tolist(),
                "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class IIDLaw(ProcessSpec):
    """An i.i.d. sequence of centered draws with known moments.

    sampler(generator, size) must return `size` independent draws; moments
    are supplied rather than inferred so exact-oracle paths stay exact.
    """

    sampler: Callable[[np.random.Generator, int], np.ndarray]
    var: float
    abs3: float
    third: float = 0.0
    sup: float = math.inf
    name: str = "iid"
    label: str = field(default="iid", init=False)

    def __post_init__(self):
        if self.var < 0.0 or self.abs3 < 0.0:
            raise DomainError("moments must be nonnegative")

    def to_dict(self) -> dict:
        return {"type": "iid", "law": self.name}


def iid_rademacher() -> IIDLaw:
    return IIDLaw(sampler=lambda g, n: 2.0 * g.integers(0, 2, n) - 1.0,
                  var=1.0, abs3=1.0, third=0.0, sup=1.0, name="rademacher")


def iid_gaussian(scale: float = 1.0) -> IIDLaw:
    if scale <= 0.0:
        raise DomainError("scale must be positive")
    return IIDLaw(sampler=lambda g, n: scale * g.standard_normal(n),
                  var=scale ** 2, abs3=scale ** 3 * math.sqrt(8.0 / math.pi),
                  third=0.0, sup=math.inf, name=f"gaussian:{scale:g}")


_IID_FACTORIES = {"rademacher": iid_rademacher, "gaussian": iid_gaussian}


def process_from_dict(d: dict) -> ProcessSpec:
    kind = d.get("type")
    if kind == "doubling_map":
        return DoublingMap()
    if kind == "circle_walk":
        if d.get("a") == "sqrt2_minus_one":
            return CircleWalk(sqrt2_minus_one())
        return CircleWalk(SplitReal(float(d["a_hi"]), float(d.get("a_lo", 0.0))))
    if kind == "finite_chain":
        return FiniteChain(np.array(d["transition"], dtype=float),
                           np.array(d["values"], dtype=float),
                           np.array(d["stationary"], dtype=float) if "stationary" in d else None)
    if kind == "iid":
        law = d.get("law", "rademacher")
        base = law.split(":", 1)
        if base[0] not in _IID_FACTORIES:
            raise DomainError(f"unknown iid law {law!r}")
        if base[0] == "gaussian" and len(base) == 2:
            return iid_gaussian(float(base[1]))
        return _IID_FACTORIES[base[0]]()
    raise DomainError(f"unknown process type {kind!r}")


def _require_fourier(spec: ProcessSpec, f) -> FourierFn:
    if isinstance(spec, FiniteChain):
        raise TypeError("FiniteChain observables are state-value vectors; "
                        "FourierFn-based operations do not apply")
    if not isinstance(f, FourierFn):
        raise TypeError("observable must be a FourierFn for this process")
    return f


# ---------------------------------------------------------------------------
# Transfer operator
# ---------------------------------------------------------------------------


def transfer(spec: ProcessSpec, f, steps: int = 1):
    """m-step conditional expectation operator K^m applied to an observable.

    Exact: the doubling map sends the coefficient at frequency 2^m * j to
    frequency j (odd parts vanish); the circle walk multiplies frequency k by
    cos^m(2*pi*k*a); an i.i.d. law collapses everything to the mean.  For a
    FiniteChain the observable is a state-value vector and K^m is the matrix
    power applied to it.
    """
    if steps < 0:
        raise DomainError("steps must be nonnegative")
    if isinstance(spec, FiniteChain):
        if isinstance(f, FourierFn):
            raise TypeError("FiniteChain transfer expects a state-value vector")
        v = np.asarray(f, dtype=float)
        if v.shape != (spec.n_states,):
            raise TypeError("FiniteChain transfer expects a state-value vector")
        return np.linalg.matrix_power(spec.transition, steps) @ v
    f = _require_fourier(spec, f)
    if steps == 0:
        return f
    if isinstance(spec, IIDLaw):
        return constant_fn(f.constant)
    if isinstance(spec, DoublingMap):
        k = f.max_freq
        step = 1 << steps
        new_k = k // step
        a = np.zeros(new_k)
        b = np.zeros(new_k)
        for j in range(1, new_k + 1):
            a[j - 1] = f.cos_coeffs[j * step - 1]
            b[j - 1] = f.sin_coeffs[j * step - 1]
        return FourierFn(f.constant, a, b)
    if isinstance(spec, CircleWalk):
        k = f.max_freq
        mult = np.array([spec.cos_step(j) ** steps for j in range(1, k + 1)])
        return FourierFn(f.constant, f.cos_coeffs * mult, f.sin_coeffs * mult)
    raise TypeError(f"unsupported process {type(spec).__name__}")


def resolvent_tail(spec: ProcessSpec, f: FourierFn, m: int = 1) -> FourierFn:
    """Sum of K^l f over l >= m, in closed form.

    The doubling map truncates (K^l f = 0 once 2^l exceeds max_freq); the
    circle walk sums the geometric series per frequency.  Raises
    DivergenceError at a rational resonance cos(2*pi*k*a) = 1.
    """
    if m < 1:
        raise DomainError("m must be >= 1")
    f = _require_fourier(spec, f)
    if not f.centered:
        raise PreconditionError("resolvent tail requires a centered observable")
    if isinstance(spec, IIDLaw):
        return constant_fn(0.0)
    if isinstance(spec, DoublingMap):
        out = constant_fn(0.0)
        l = m
        while f.max_freq >> l:
            out = out + transfer(spec, f, l)
            l += 1
        return out
    if isinstance(spec, CircleWalk):
        k = f.max_freq
        mult = np.zeros(k)
        for j in range(1, k + 1):
            if f.cos_coeffs[j - 1] == 0.0 and f.sin_coeffs[j - 1] == 0.0:
                continue
            denom = 2.0 * spec.sin_sq_half_step(j)  # = 1 - cos(2 pi j a)
            if denom < 1e-24:
                raise DivergenceError(
                    f"resonance: cos(2*pi*{j}*a) = 1 within tolerance; tail diverges")
            mult[j - 1] = spec.cos_step(j) ** m / denom
        return FourierFn(0.0, f.cos_coeffs * mult, f.sin_coeffs * mult)
    raise TypeError(f"unsupported process {type(spec).__name__}")


def is_martingale(spec: ProcessSpec, f) -> bool:
    """True when the one-step conditional expectation of f vanishes."""
    kf = transfer(spec, f, 1)
    if isinstance(spec, FiniteChain):
        return bool(np.max(np.abs(kf), initial=0.0) < MARTINGALE_TOL)
    return kf.is_zero(MARTINGALE_TOL)


# ---------------------------------------------------------------------------
# Long-run variance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LongRunVariance:
    sigma2: float
    covariances: tuple  # lambda(f * K^n f) for n = 0..len-1 (n=0 is the marginal variance)

    def __float__(self) -> float:
        return self.sigma2


def long_run_variance(spec: ProcessSpec, f=None, cov_terms: int = 64) -> LongRunVariance:
    """Marginal variance plus twice the summed autocovariances, exactly.

    The circle walk uses the cotangent closed form per frequency; the
    doubling map's covariance series terminates once 2^n exceeds max_freq.
    """
    if isinstance(spec, IIDLaw):
        return LongRunVariance(spec.var, (spec.var,))
    if isinstance(spec, FiniteChain):
        if f is not None:
            raise TypeError("FiniteChain carries its own state-value observable")
        v = spec.values - float(spec.stationary @ spec.values)
        pi = spec.stationary
        var0 = float(pi @ (v * v))
        n = spec.n_states
        proj = np.outer(np.ones(n), pi)
        fundamental = np.linalg.solve(np.eye(n) - spec.transition + proj, v)
        sigma2 = var0 + 2.0 * float(pi @ (v * (fundamental - v)))
        covs = [var0]
        pv = v.copy()
        for _ in range(1, cov_terms):
            pv = spec.transition @ pv
            covs.append(float(pi @ (v * pv)))
        if sigma2 < _VARIANCE_FLOOR:
            raise DegenerateVarianceError(f"long-run variance {sigma2!r} is negative")
        return LongRunVariance(max(sigma2, 0.0), tuple(covs))
    f = _require_fourier(spec, f)
    if not f.centered:
        raise PreconditionError("long_run_variance requires a centered observable")
    if isinstance(spec, DoublingMap):
        var0 = lebesgue_inner(f, f)
        covs = [var0]
        sigma2 = var0
        n = 1
        while f.max_freq >> n:
            c = lebesgue_inner(f, transfer(spec, f, n))
            covs.append(c)
            sigma2 += 2.0 * c
            n += 1
        if sigma2 < _VARIANCE_FLOOR:
            raise DegenerateVarianceError(f"long-run variance {sigma2!r} is negative")
        return LongRunVariance(max(sigma2, 0.0), tuple(covs))
    if isinstance(spec, CircleWalk):
        sigma2 = 0.0
        for j in range(1, f.max_freq + 1):
            w = 0.5 * (f.cos_coeffs[j - 1] ** 2 + f.sin_coeffs[j - 1] ** 2)
            if w == 0.0:
                continue
            frac = exact_frac(spec.a, j)
            if min(frac, 1.0 - frac) < 1e-12:
                raise DivergenceError(f"resonance at frequency {j}: variance series diverges")
            sigma2 += w / math.tan(math.pi * frac) ** 2
        covs = [lebesgue_inner(f, f)]
        for n in range(1, cov_terms):
            covs.append(lebesgue_inner(f, transfer(spec, f, n)))
        if sigma2 < _VARIANCE_FLOOR:
            raise DegenerateVarianceError(f"long-run variance {sigma2!r} is negative")
        return LongRunVariance(max(sigma2, 0.0), tuple(covs))
    raise TypeError(f"unsupported process {type(spec).__name__}")


# ---------------------------------------------------------------------------
# Path simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Replicated partial-sum trajectories with full seed provenance.

    Row r of partial_sums was produced from substream(seed, r); column c
    holds S_{checkpoints[c]} for that replicate.
    """

    n: int
    reps: int
    checkpoints: tuple
    partial_sums: np.ndarray
    sigma_ref: float
    seed: int

    def column(self, n: int) -> np.ndarray:
        try:
            idx = self.checkpoints.index(n)
        except ValueError:
            raise DomainError(f"{n} is not a checkpoint of this ensemble") from None
        return self.partial_sums[:, idx]

    def normalized(self, n: int) -> np.ndarray:
        return self.column(n) / math.sqrt(n)


_BITS_PER_WORD = 64


def _row_bit_words(gen: np.random.Generator, n_words: int) -> np.ndarray:
    return gen.integers(0, (1 << 64) - 1, size=n_words, dtype=np.uint64, endpoint=True)


def _simulate_block_doubling(f: FourierFn, n: int, checkpoints, gens) -> np.ndarray:
    block = len(gens)
    n_words = (n + _BITS_PER_WORD - 1) // _BITS_PER_WORD
    w = np.empty(block, dtype=np.uint64)
    bits = np.empty((block, n_words), dtype=np.uint64)
    for r, g in enumerate(gens):
        w[r] = _row_bit_words(g, 1)[0]
        bits[r] = _row_bit_words(g, n_words)
    out = np.empty((block, len(checkpoints)))
    cp = {n_val: c for c, n_val in enumerate(checkpoints)}
    s = np.zeros(block)
    scale = 2.0 ** -64
    for t in range(n):
        b = (bits[:, t >> 6] >> np.uint64(t & 63)) & np.uint64(1)
        # xi_{t+1} = (xi_t + B)/2, exactly, in 64-bit fixed point
        w = (w >> np.uint64(1)) | (b << np.uint64(63))
        s += f.eval(w.astype(np.float64) * scale)
        if (t + 1) in cp:
            out[:, cp[t + 1]] = s
    return out


def _simulate_block_circle(spec: CircleWalk, f: FourierFn, n: int, checkpoints, gens) -> np.ndarray:
    block = len(gens)
    n_words = (n + _BITS_PER_WORD - 1) // _BITS_PER_WORD
    xi0 = np.empty(block)
    bits = np.empty((block, n_words), dtype=np.uint64)
    for r, g in enumerate(gens):
        xi0[r] = g.random()
        bits[r] = _row_bit_words(g, n_words)
    out = np.empty((block, len(checkpoints)))
    cp = {n_val: c for c, n_val in enumerate(checkpoints)}
    s = np.zeros(block)
    c = np.zeros(block, dtype=np.int64)
    hi, lo = spec.a.hi, spec.a.lo
    for t in range(n):
        b = ((bits[:, t >> 6] >> np.uint64(t & 63)) & np.uint64(1)).astype(np.int64)
        c += 2 * b - 1
        pos = np.mod(xi0 + c * hi + c * lo, 1.0)
        s += f.eval(pos)
        if (t + 1) in cp:
            out[:, cp[t + 1]] = s
    return out


def _simulate_block_chain(spec: FiniteChain, n: int, checkpoints, gens) -> np.ndarray:
    block = len(gens)
    u = np.empty((block, n + 1))
    for r, g in enumerate(gens):
        u[r] = g.random(n + 1)
    pi_cum = np.cumsum(spec.stationary)
    p_cum = np.cumsum(spec.transition, axis=1)
    state = np.searchsorted(pi_cum, u[:, 0], side="right").clip(0, spec.n_states - 1)
    out = np.empty((block, len(checkpoints)))
    cp = {n_val: c for c, n_val in enumerate(checkpoints)}
    s = np.zeros(block)
    v = spec.values
    for t in range(n):
        rows = p_cum[state]
        state = (rows < u[:, t + 1][:, None]).sum(axis=1).clip(0, spec.n_states - 1)
        s += v[state]
        if (t + 1) in cp:
            out[:, cp[t + 1]] = s
    return out


def _simulate_block_iid(spec: IIDLaw, n: int, checkpoints, gens) -> np.ndarray:
    out = np.empty((len(gens), len(checkpoints)))
    idx = np.asarray(checkpoints, dtype=int) - 1
    for r, g in enumerate(gens):
        draws = np.asarray(spec.sampler(g, n), dtype=float)
        out[r] = np.cumsum(draws)[idx]
    return out


def simulate(spec: ProcessSpec, f: Optional[FourierFn], n: int, reps: int,
             checkpoints: Optional[Sequence[int]] = None, seed: int = 0,
             block_size: int = 4096) -> PathEnsemble:
    """Simulate `reps` stationary partial-sum paths, recording S at checkpoints.

    Replicate r consumes substream(seed, r) only, so ensembles are
    reproducible bit for bit and independent of block scheduling.  The
    doubling map runs in 64-bit fixed point (the map (x+B)/2 is exact there);
    the circle walk tracks positions through the split representation of a.
    """
    if n < 1 or reps < 1:
        raise DomainError("n and reps must be >= 1")
    checkpoints = tuple(sorted(set(int(c) for c in (checkpoints or [n]))))
    if checkpoints[0] < 1 or checkpoints[-1] > n:
        raise DomainError("checkpoints must lie in [1, n]")
    if isinstance(spec, (DoublingMap, CircleWalk)):
        f = _require_fourier(spec, f)
        if not f.centered:
            raise PreconditionError("simulate requires a centered observable")
        sigma_ref = math.sqrt(long_run_variance(spec, f).sigma2)
    elif isinstance(spec, IIDLaw):
        sigma_ref = math.sqrt(spec.var)
    elif isinstance(spec, FiniteChain):
        sigma_ref = math.sqrt(long_run_variance(spec).sigma2)
    else:
        raise TypeError(f"unsupported process {type(spec).__name__}")

    rows = []
    for start in range(0, reps, block_size):
        stop = min(start + block_size, reps)
        gens = [substream(seed, r).generator() for r in range(start, stop)]
        if isinstance(spec, DoublingMap):
            rows.append(_simulate_block_doubling(f, n, checkpoints, gens))
        elif isinstance(spec, CircleWalk):
            rows.append(_simulate_block_circle(spec, f, n, checkpoints, gens))
        elif isinstance(spec, FiniteChain):
            rows.append(_simulate_block_chain(spec, n, checkpoints, gens))
        else:
            rows.append(_simulate_block_iid(spec, n, checkpoints, gens))
    sums = np.vstack(rows)
    sums.setflags(write=False)
    return PathEnsemble(n=n, reps=reps, checkpoints=checkpoints,
                        partial_sums=sums, sigma_ref=sigma_ref, seed=seed)


def sample_states(spec: ProcessSpec, step: int, reps: int, seed: int = 0) -> np.ndarray:
    """Marginal sample of the chain state at a fixed time (diagnostics only)."""
    if step < 0:
        raise DomainError("step must be nonnegative")
    if isinstance(spec, DoublingMap):
        out = np.empty(reps)
        for r in range(reps):
            g = substream(seed, r).generator()
            w = int(_row_bit_words(g, 1)[0])
            if step:
                words = _row_bit_words(g, (step + 63) // 64)
                for t in range(step):
                    bit = (int(words[t >> 6]) >> (t & 63)) & 1
                    w = (w >> 1) | (bit << 63)
            out[r] = w * 2.0 ** -64
        return out
    if isinstance(spec, CircleWalk):
        out = np.empty(reps)
        for r in range(reps):
            g = substream(seed, r).generator()
            x = g.random()
            c = int((2 * g.integers(0, 2, size=step) - 1).sum()) if step else 0
            out[r] = (x + c * spec.a.hi + c * spec.a.lo) % 1.0
        return out
    raise TypeError("sample_states supports the interval maps only")
