"""Experiment orchestration: rate experiments, condition diagnostics,
appendix fuzzing, manifests, and plot-data emission.

A run simulates one checkpointed path ensemble, computes the exact W1
distance of each checkpoint sample to the analytic Gaussian limit, evaluates
the requested deterministic bounds, fits the empirical rate, and writes a
CSV table plus a JSON manifest.  Everything is keyed by substreams of the
config seed, so re-running a config reproduces the outputs byte for byte.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__ as _VERSION
from .bounds import (martingale_d1_bound, moments, projective_d1_bound, rate_fit,
                     second_moment_norms, variance_l32_norm, zolotarev_bound)
from .coefficients import (AlphaSeq, QuantileSeq, alpha_tabulation,
                           covariance_bound_check, dispersion_check, JointPmf,
                           mixing_integral, monotone_difference_bound_check,
                           quantile_from_sample, theta_coeff, weighted_tail_integral)
from .errors import DomainError, SchemaError
from .fourier import FourierFn, cosine
from .numerics import Tolerance, substream
from .processes import (DoublingMap, CircleWalk, FiniteChain, IIDLaw, ProcessSpec,
                        is_martingale, iid_rademacher, long_run_variance,
                        process_from_dict, simulate, sqrt2_minus_one)
from .wasserstein import EmpiricalSample, FinitePmf, ks_sample_gauss, w1_pmf_gauss, w1_sample_gauss

SCHEMA_VERSION = "1"

TARGETS = ("empirical_d1", "ks", "martingale_bound", "projective_bound",
           "second_moment_terms", "rate_fit", "zolotarev")

CSV_COLUMNS = ("process", "observable", "n", "reps", "d1_normalized",
               "d1_unnormalized", "d1_boot_se", "ks", "bound_martingale",
               "bound_projective", "second_moment_drift", "resolvent_smoothing",
               "zolotarev", "slope")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    process: ProcessSpec
    observable: Optional[FourierFn]
    n_grid: tuple
    reps: int
    seed: int
    targets: tuple
    tolerance: Tolerance = Tolerance()
    output: Optional[str] = None
    exact_pmf: bool = False
    bootstrap: int = 100

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        if len(grid) == 0 or any(b <= a for a, b in zip(grid[:-1], grid[1:])) or grid[0] < 1:
            raise DomainError("n_grid must be a nonempty strictly increasing positive sequence")
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(self, "targets", tuple(self.targets))
        for t in self.targets:
            if t not in TARGETS:
                raise DomainError(f"unknown target {t!r}; valid: {TARGETS}")
        if "empirical_d1" in self.targets and not self.exact_pmf and self.reps < 100:
            raise DomainError("empirical targets require reps >= 100")
        if self.exact_pmf and not (isinstance(self.process, IIDLaw)
                                   and self.process.name == "rademacher"):
            raise DomainError("exact-pmf mode is available for the Rademacher iid law only")

    def to_dict(self) -> dict:
        return {"process": self.process.to_dict(),
                "observable": self.observable.to_dict() if self.observable else None,
                "n_grid": list(self.n_grid),
                "reps": self.reps,
                "seed": self.seed,
                "targets": list(self.targets),
                "tolerance": {"abs_tol": self.tolerance.abs_tol,
                              "rel_tol": self.tolerance.rel_tol,
                              "max_depth": self.tolerance.max_depth},
                "output": self.output,
                "exact_pmf": self.exact_pmf,
                "bootstrap": self.bootstrap}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        tol = d.get("tolerance") or {}
        return cls(process=process_from_dict(d["process"]),
                   observable=FourierFn.from_dict(d["observable"]) if d.get("observable") else None,
                   n_grid=tuple(d["n_grid"]),
                   reps=int(d.get("reps", 0) or 1),
                   seed=int(d.get("seed", 0)),
                   targets=tuple(d.get("targets", ("empirical_d1", "rate_fit"))),
                   tolerance=Tolerance(tol.get("abs_tol", 1e-11), tol.get("rel_tol", 1e-11),
                                       tol.get("max_depth", 44)),
                   output=d.get("output"),
                   exact_pmf=bool(d.get("exact_pmf", False)),
                   bootstrap=int(d.get("bootstrap", 100)))

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def preset_config(name: str, n_max: Optional[int] = None, reps: Optional[int] = None,
                  seed: Optional[int] = None, output: Optional[str] = None
                  ) -> ExperimentConfig:
    """Built-in one-command experiment configurations."""
    if name == "mds-doubling":
        cfg = ExperimentConfig(DoublingMap(), cosine(1), (64, 256, 1024, 4096, 16384),
                               reps=20000, seed=1,
                               targets=("empirical_d1", "ks", "martingale_bound",
                                        "rate_fit", "zolotarev"))
    elif name == "circle-walk":
        cfg = ExperimentConfig(CircleWalk(sqrt2_minus_one()), cosine(1),
                               (64, 256, 1024, 4096, 16384), reps=10000, seed=1,
                               targets=("empirical_d1", "ks", "projective_bound",
                                        "rate_fit"))
    elif name == "iid-rademacher-exact":
        cfg = ExperimentConfig(iid_rademacher(), None, (64, 128, 256, 512, 1024, 2048, 4096),
                               reps=1, seed=1, exact_pmf=True,
                               targets=("empirical_d1", "ks", "rate_fit", "zolotarev"))
    elif name == "doubling-nonadapted":
        cfg = ExperimentConfig(DoublingMap(), cosine(2), (64, 256, 1024), reps=5000, seed=1,
                               targets=("empirical_d1", "projective_bound",
                                        "second_moment_terms", "rate_fit"))
    else:
        raise DomainError(f"unknown preset {name!r}; available: mds-doubling, circle-walk, "
                          "iid-rademacher-exact, doubling-nonadapted")
    updates = {}
    if n_max is not None:
        grid = tuple(n for n in cfg.n_grid if n <= n_max)
        if not grid:
            raise DomainError(f"--n-max {n_max} removes every grid point")
        updates["n_grid"] = grid
    if reps is not None:
        updates["reps"] = reps
    if seed is not None:
        updates["seed"] = seed
    if output is not None:
        updates["output"] = output
    if updates:
        d = cfg.to_dict()
        d.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in updates.items()})
        cfg = ExperimentConfig.from_dict(d)
    return cfg


# ---------------------------------------------------------------------------
# Running experiments
# ---------------------------------------------------------------------------


def _worker_count() -> int:
    env = os.environ.get("MEANCLT_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _rademacher_pmf(n: int) -> FinitePmf:
    """Exact law of S_n / sqrt(n) for i.i.d. signs, via log binomial weights."""
    k = np.arange(n + 1)
    logp = (np.array([math.lgamma(n + 1) - math.lgamma(i + 1) - math.lgamma(n - i + 1)
                      for i in k]) - n * math.log(2.0))
    probs = np.exp(logp)
    atoms = (2.0 * k - n) / math.sqrt(n)
    keep = probs > 0.0
    return FinitePmf(atoms[keep], probs[keep])


def _ks_pmf_gauss(p: FinitePmf, sigma: float) -> float:
    from .numerics import gauss_cdf
    cum = np.cumsum(p.probs)
    phi = np.asarray(gauss_cdf(p.atoms / sigma), dtype=float)
    left = np.concatenate([[0.0], cum[:-1]])
    return float(np.maximum(np.abs(cum - phi), np.abs(left - phi)).max())


def _bootstrap_se(sample: np.ndarray, sigma: float, count: int, stream) -> float:
    """Bootstrap standard error of the plug-in W1 over resampled replicates."""
    if count < 2:
        return 0.0
    gen = stream.generator()
    m = sample.size
    vals = np.empty(count)
    for b in range(count):
        idx = gen.integers(0, m, m)
        vals[b] = w1_sample_gauss(EmpiricalSample(sample[idx]), sigma)
    return float(vals.std(ddof=1))


@dataclass(frozen=True)
class RunManifest:
    schema_version: str
    library_version: str
    config: dict
    sigma2: float
    sigma: float
    per_n: tuple
    fit: Optional[dict]
    zolotarev: Optional[float]
    seed_provenance: dict
    timings: dict

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version,
                "library_version": self.library_version,
                "config": self.config,
                "sigma2": self.sigma2,
                "sigma": self.sigma,
                "per_n": list(self.per_n),
                "fit": self.fit,
                "zolotarev": self.zolotarev,
                "seed_provenance": self.seed_provenance,
                "timings": self.timings}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_rows(self) -> list:
        label_p = self.config["process"]["type"]
        obs = self.config.get("observable")
        label_f = FourierFn.from_dict(obs).describe() if obs else "identity"
        slope = self.fit["slope"] if self.fit else ""
        rows = []
        for rec in self.per_n:
            row = {"process": label_p, "observable": label_f, "n": rec["n"],
                   "reps": self.config["reps"],
                   "d1_normalized": rec.get("d1_normalized", ""),
                   "d1_unnormalized": rec.get("d1_unnormalized", ""),
                   "d1_boot_se": rec.get("d1_boot_se", ""),
                   "ks": rec.get("ks", ""),
                   "bound_martingale": (rec.get("bound_martingale") or {}).get("total", ""),
                   "bound_projective": (rec.get("bound_projective") or {}).get("total", ""),
                   "second_moment_drift": rec.get("second_moment_drift", ""),
                   "resolvent_smoothing": rec.get("resolvent_smoothing", ""),
                   "zolotarev": self.zolotarev if self.zolotarev is not None else "",
                   "slope": slope}
            rows.append(row)
        return rows

    def write(self, prefix) -> tuple:
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        csv_path = prefix.with_suffix(".csv")
        csv_path.write_text(render_csv(self.csv_rows()))
        manifest_path = Path(str(prefix) + ".manifest.json")
        manifest_path.write_text(self.to_json() + "\n")
        return csv_path, manifest_path


def render_csv(rows: Sequence[dict], columns: Sequence[str] = CSV_COLUMNS) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_csv_cell(row.get(c, "")) for c in columns))
    return "\n".join(lines) + "\n"


def _csv_cell(v) -> str:
    if v == "" or v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def run(config: ExperimentConfig) -> RunManifest:
    """Execute one experiment configuration end to end."""
    timings = {}
    t0 = time.perf_counter()
    spec, f = config.process, config.observable

    if isinstance(spec, IIDLaw):
        sigma2 = spec.var
    else:
        sigma2 = long_run_variance(spec, f).sigma2
    sigma = math.sqrt(sigma2)

    zolo = None
    if "zolotarev" in config.targets:
        mom = moments(spec, f)
        zolo = zolotarev_bound(mom.abs3, mom.var0)

    per_n = [dict(n=n) for n in config.n_grid]

    if config.exact_pmf:
        t = time.perf_counter()
        for rec in per_n:
            pmf = _rademacher_pmf(rec["n"])
            d1 = w1_pmf_gauss(pmf, sigma)
            rec["d1_normalized"] = d1
            rec["d1_unnormalized"] = math.sqrt(rec["n"]) * d1
            if "ks" in config.targets:
                rec["ks"] = _ks_pmf_gauss(pmf, sigma)
        timings["exact_pmf"] = time.perf_counter() - t
    elif "empirical_d1" in config.targets or "ks" in config.targets:
        t = time.perf_counter()
        ens = simulate(spec, f, config.n_grid[-1], config.reps,
                       checkpoints=config.n_grid, seed=config.seed)
        timings["simulate"] = time.perf_counter() - t
        t = time.perf_counter()
        for gi, rec in enumerate(per_n):
            n = rec["n"]
            sample = ens.normalized(n)
            if "empirical_d1" in config.targets:
                d1 = w1_sample_gauss(EmpiricalSample(sample), sigma)
                rec["d1_normalized"] = d1
                rec["d1_unnormalized"] = math.sqrt(n) * d1
                rec["d1_boot_se"] = _bootstrap_se(sample, sigma, config.bootstrap,
                                                  substream(config.seed, config.reps + gi))
            if "ks" in config.targets:
                rec["ks"] = ks_sample_gauss(EmpiricalSample(sample), sigma)
        timings["distances"] = time.perf_counter() - t

    bound_jobs = []
    if "martingale_bound" in config.targets:
        bound_jobs.append(("bound_martingale",
                           lambda n: martingale_d1_bound(spec, f, n, config.tolerance).to_dict()))
    if "projective_bound" in config.targets:
        bound_jobs.append(("bound_projective",
                           lambda n: projective_d1_bound(spec, f, n, config.tolerance).to_dict()))
    if bound_jobs or "second_moment_terms" in config.targets:
        t = time.perf_counter()

        def eval_bounds(rec):
            n = rec["n"]
            for key, fn in bound_jobs:
                rec[key] = fn(n)
            if "second_moment_terms" in config.targets:
                drift, smooth = second_moment_norms(spec, f, int(math.isqrt(2 * n)),
                                                    config.tolerance)
                rec["second_moment_drift"] = drift
                rec["resolvent_smoothing"] = smooth

        workers = _worker_count()
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(eval_bounds, per_n))
        else:
            for rec in per_n:
                eval_bounds(rec)
        timings["bounds"] = time.perf_counter() - t

    fit = None
    if "rate_fit" in config.targets and all("d1_normalized" in rec for rec in per_n) \
            and len(per_n) >= 3:
        rf = rate_fit([(rec["n"], rec["d1_normalized"]) for rec in per_n])
        fit = {"slope": rf.slope, "intercept": rf.intercept, "r2": rf.r2}

    timings["total"] = time.perf_counter() - t0
    manifest = RunManifest(
        schema_version=SCHEMA_VERSION,
        library_version=_VERSION,
        config=config.to_dict(),
        sigma2=sigma2,
        sigma=sigma,
        per_n=tuple(per_n),
        fit=fit,
        zolotarev=zolo,
        seed_provenance={"rows": f"substream(seed, 0..{config.reps - 1})",
                         "bootstrap": f"substream(seed, {config.reps}..{config.reps + len(config.n_grid) - 1})"},
        timings=timings)
    if config.output:
        manifest.write(config.output)
    return manifest


# ---------------------------------------------------------------------------
# Appendix fuzzing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AppendixReport:
    total: int
    covariance_passes: int
    corollary_passes: int
    dispersion_passes: int
    equality_case: dict
    failures: tuple

    @property
    def all_pass(self) -> bool:
        return (self.covariance_passes == self.total
                and self.corollary_passes == self.total
                and self.dispersion_passes == self.total
                and not self.failures)

    def to_dict(self) -> dict:
        return {"total": self.total,
                "covariance_passes": self.covariance_passes,
                "corollary_passes": self.corollary_passes,
                "dispersion_passes": self.dispersion_passes,
                "equality_case": self.equality_case,
                "failures": list(self.failures),
                "all_pass": self.all_pass}


def _random_joint(gen) -> JointPmf:
    k = int(gen.integers(2, 4))
    coords = [np.sort(gen.choice(np.round(gen.normal(0.0, 1.5, 8), 2), size=int(gen.integers(2, 5)),
                                 replace=False)) for _ in range(k)]
    cells = list(itertools.product(*coords))
    count = min(len(cells), int(gen.integers(2, 13)))
    chosen = gen.choice(len(cells), size=count, replace=False)
    pts = np.array([cells[i] for i in chosen], dtype=float)
    pr = gen.dirichlet(np.ones(count))
    return JointPmf(pts, pr)


def _random_monotone_pair(gen):
    s1, s2 = float(gen.uniform(0.0, 2.0)), float(gen.uniform(0.0, 2.0))
    b1, b2 = float(gen.normal()), float(gen.normal())
    kink = float(gen.normal())
    return (lambda x, s=s1, b=b1, c=kink: s * x + b + np.maximum(x - c, 0.0),
            lambda x, s=s2, b=b2: s * x + b)


def check_appendix(count: int, seed: int) -> AppendixReport:
    """Fuzz the covariance-inequality machinery on random finite joints.

    Each instance checks the product-covariance bound, the dispersion
    inequalities of every marginal, and the monotone-difference corollary
    with random nondecreasing transform pairs.  The identical-coordinate
    Rademacher equality case is always included and reported separately.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    gen = substream(seed, 0).generator()
    cov_pass = cor_pass = disp_pass = 0
    failures = []
    for idx in range(count):
        j = _random_joint(gen)
        rep = covariance_bound_check(j)
        if rep.holds:
            cov_pass += 1
        else:
            failures.append({"index": idx, "kind": "covariance", "lhs": rep.lhs,
                             "rhs": rep.rhs, "joint": j.to_dict()})
        transforms = [_random_monotone_pair(gen) for _ in range(j.k)]
        rep2 = monotone_difference_bound_check(j, transforms)
        if rep2.holds:
            cor_pass += 1
        else:
            failures.append({"index": idx, "kind": "corollary", "lhs": rep2.lhs,
                             "rhs": rep2.rhs, "joint": j.to_dict()})
        if all(dispersion_check(j.marginal(c)) for c in range(j.k)):
            disp_pass += 1
        else:
            failures.append({"index": idx, "kind": "dispersion", "joint": j.to_dict()})
    rad = JointPmf(np.array([[-1.0, -1.0], [1.0, 1.0]]), np.array([0.5, 0.5]))
    eq = covariance_bound_check(rad)
    equality = {"lhs": eq.lhs, "alpha": eq.alpha, "rhs": eq.rhs,
                "is_equality": abs(eq.lhs - eq.rhs) <= 1e-12 and eq.lhs == 1.0}
    return AppendixReport(total=count, covariance_passes=cov_pass,
                          corollary_passes=cor_pass, dispersion_passes=disp_pass,
                          equality_case=equality, failures=tuple(failures))


# ---------------------------------------------------------------------------
# Condition diagnostics
# ---------------------------------------------------------------------------

THETA_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (1, 4),
               (2, 3), (2, 4), (3, 4))


def _verdict(partials: Sequence[float]) -> str:
    """Trend call from the mass the last half-decade adds to the partial sum.

    Geometric-type series leave well under 15% there at moderate depth; a
    non-vanishing term sequence leaves about 75%.
    """
    if not partials or partials[-1] == 0.0:
        return "converging"
    half = partials[max(0, len(partials) // 2 - 1)]
    tail_frac = (partials[-1] - half) / partials[-1]
    if tail_frac < 0.15:
        return "converging"
    if tail_frac < 0.5:
        return "inconclusive"
    return "diverging"


@dataclass(frozen=True)
class DiagnosisReport:
    theta: dict
    jan: Optional[dict]
    mixing: dict
    verdicts: dict

    def to_dict(self) -> dict:
        return {"theta": self.theta, "jan": self.jan, "mixing": self.mixing,
                "verdicts": self.verdicts}


def diagnose_conditions(spec: ProcessSpec, f: Optional[FourierFn], kmax: int,
                        window: int = 3, alpha: Optional[AlphaSeq] = None,
                        quantile: Optional[QuantileSeq] = None) -> DiagnosisReport:
    """Tabulate dependence-coefficient and mixing-integral condition series.

    theta columns hold j * theta_{p,q}(j) partial sums for the standard index
    pairs; the mixing entries evaluate the weighted tail-integral series for
    powers p = 3 with weights b in {0, 1} plus the equivalent single-integral
    form, using exact doubling-map alpha values when no tabulation is given.
    Each series carries a converging / inconclusive / diverging verdict from
    its last-decade ratio.
    """
    if kmax < 1:
        raise DomainError("kmax must be >= 1")
    theta = {}
    verdicts = {}
    for (p, q) in THETA_PAIRS:
        values = []
        partials = []
        total = 0.0
        for j in range(1, kmax + 1):
            v = theta_coeff(spec, f, p, q, j, window)
            values.append(v)
            total += j * v
            partials.append(total)
        key = f"theta_{p}{q}"
        theta[key] = {"values": values, "weighted_partials": partials}
        verdicts[key] = _verdict(partials)

    jan = None
    if not isinstance(spec, FiniteChain) and (isinstance(spec, IIDLaw) or is_martingale(spec, f)):
        values = []
        partials = []
        total = 0.0
        for l in range(1, kmax + 1):
            v = variance_l32_norm(spec, f, l)
            values.append(v)
            total += v
            partials.append(total)
        jan = {"values": values, "partials": partials}
        verdicts["jan"] = _verdict(partials)

    if alpha is None and isinstance(spec, DoublingMap):
        alpha = alpha_tabulation(spec, min(kmax, 12), grid=min(kmax + 1, 12))
    if quantile is None and f is not None and not isinstance(spec, FiniteChain):
        grid_pts = (np.arange(1 << 14) + 0.5) / (1 << 14)
        quantile = quantile_from_sample(EmpiricalSample(np.abs(np.asarray(f.eval(grid_pts)))))
    mixing = {}
    if alpha is not None and quantile is not None:
        upto = min(kmax, len(alpha) - 1)
        for weight, label in ((1, "cubic_tail_b1"), (0, "cubic_tail_b0")):
            rep = mixing_integral(alpha, quantile, power=3, weight=weight, kmax=upto)
            mixing[label] = {"series": rep.series_value,
                             "integral_form": rep.integral_form,
                             "partials": list(rep.partial_sums),
                             "last_decade_ratio": rep.last_decade_ratio}
            verdicts[label] = _verdict(rep.partial_sums)
        mixing["inverse_weighted_integral"] = weighted_tail_integral(
            alpha, quantile, power=3, weight=1, kmax=upto)
    return DiagnosisReport(theta=theta, jan=jan, mixing=mixing, verdicts=verdicts)


# ---------------------------------------------------------------------------
# Report merging
# ---------------------------------------------------------------------------


def merge_reports(paths: Sequence) -> list:
    """Merge per-n tables of several manifests into one list of CSV rows."""
    rows = []
    seen_version = None
    for path in paths:
        d = json.loads(Path(path).read_text())
        missing = [k for k in ("schema_version", "config", "per_n") if k not in d]
        if missing:
            raise SchemaError(f"{path}: missing manifest fields {missing}")
        if seen_version is None:
            seen_version = d["schema_version"]
        elif d["schema_version"] != seen_version:
            raise SchemaError(f"{path}: schema_version {d['schema_version']!r} "
                              f"!= {seen_version!r} (field: schema_version)")
        manifest = RunManifest(schema_version=d["schema_version"],
                               library_version=d.get("library_version", ""),
                               config=d["config"], sigma2=d.get("sigma2", 0.0),
                               sigma=d.get("sigma", 0.0), per_n=tuple(d["per_n"]),
                               fit=d.get("fit"), zolotarev=d.get("zolotarev"),
                               seed_provenance=d.get("seed_provenance", {}),
                               timings=d.get("timings", {}))
        for row in manifest.csv_rows():
            row["seed"] = manifest.config.get("seed")
            rows.append(row)
    return rows
