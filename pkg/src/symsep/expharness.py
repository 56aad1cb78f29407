"""Monte-Carlo NE experiments, concentration sweeps and chi-distribution fits."""

from __future__ import annotations

import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.integrate
import scipy.optimize
import scipy.special
import scipy.stats

from . import __version__
from .ensembles import EnsembleSpec, RngStream, sample_matrix
from .errors import ConfigError, DimensionError, NumericalError, SymsepError
from .symmetry import ChargeFamily
from .witness import local_sectors, number_entanglement

# samples per work unit; fixed so the split never depends on the worker count
CHUNK = 128

LEVY_C = 1.0 / (18.0 * math.pi**3)


@dataclass(frozen=True)
class ExperimentConfig:
    ensemble: EnsembleSpec
    charge: dict  # ChargeFamily JSON, resolved against the ensemble dims
    samples: int
    seed: int = 0
    workers: int = 1
    histogram_bins: int | str = "fd"
    label: str = ""

    def __post_init__(self):
        if self.samples < 0:
            raise ConfigError("samples must be non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if isinstance(self.histogram_bins, str):
            if self.histogram_bins not in ("fd", "auto", "sturges", "sqrt", "doane", "scott", "rice"):
                raise ConfigError(f"unknown binning rule {self.histogram_bins!r}")
        elif int(self.histogram_bins) < 2:
            raise ConfigError("histogram_bins must be at least 2")

    def family(self) -> ChargeFamily:
        return ChargeFamily.from_dict(self.charge, self.ensemble.dims)

    def with_dims(self, dims: Sequence[int]) -> "ExperimentConfig":
        ens = EnsembleSpec(self.ensemble.kind, tuple(dims), dict(self.ensemble.params))
        return replace(self, ensemble=ens)

    def to_dict(self) -> dict:
        return {
            "ensemble": self.ensemble.to_dict(),
            "charge": self.charge,
            "samples": self.samples,
            "seed": self.seed,
            "workers": self.workers,
            "histogram_bins": self.histogram_bins,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        for key in ("ensemble", "charge", "samples"):
            if key not in obj:
                raise ConfigError(f"experiment config missing key {key!r}")
        try:
            return cls(
                ensemble=EnsembleSpec.from_dict(obj["ensemble"]),
                charge=obj["charge"],
                samples=int(obj["samples"]),
                seed=int(obj.get("seed", 0)),
                workers=int(obj.get("workers", 1)),
                histogram_bins=obj.get("histogram_bins", "fd"),
                label=str(obj.get("label", "")),
            )
        except SymsepError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad experiment config: {exc}") from None


@dataclass
class DistributionStats:
    mean: float
    std: float
    min: float
    max: float
    bin_edges: np.ndarray
    counts: np.ndarray
    sample_count: int
    samples: np.ndarray = field(default=None, repr=False)

    @property
    def sem(self) -> float:
        return self.std / math.sqrt(self.sample_count) if self.sample_count else float("nan")

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "max": self.max,
            "sample_count": self.sample_count,
            "bin_edges": [float(x) for x in self.bin_edges],
            "counts": [int(c) for c in self.counts],
        }

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        buf.write("bin_lo,bin_hi,count\n")
        for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts):
            buf.write(f"{float(lo)!r},{float(hi)!r},{int(c)}\n")
        return buf.getvalue()


def summarize(values: np.ndarray, bins: int | str = "fd") -> DistributionStats:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return DistributionStats(float("nan"), float("nan"), float("nan"), float("nan"), np.zeros(0), np.zeros(0, int), 0, v)
    edges = np.histogram_bin_edges(v, bins=bins)
    if edges.size < 3:
        # fd degenerates for (near-)constant data; keep at least two bins
        lo, hi = float(v.min()), float(v.max())
        edges = np.linspace(lo, hi if hi > lo else lo + 1e-12, 3)
    counts, _ = np.histogram(v, bins=edges)
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return DistributionStats(float(v.mean()), std, float(v.min()), float(v.max()), edges, counts, int(v.size), v)


def _ne_chunk(args) -> np.ndarray:
    cfg_dict, start, stop = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    family = cfg.family()
    if family.local is None:
        raise ConfigError("NE experiments need a charge family with local charges")
    sec = local_sectors(family.local[0], cfg.ensemble.dims, 0)
    out = np.empty(stop - start)
    for k, idx in enumerate(range(start, stop)):
        rng = RngStream(cfg.seed, idx).generator()
        m = sample_matrix(cfg.ensemble, rng, family)
        out[k] = number_entanglement(m, sec)
    return out


def _validate_pairing(cfg: ExperimentConfig) -> None:
    if len(cfg.ensemble.dims) != 2:
        raise DimensionError("NE experiments need bipartite ensemble dims")
    fam = cfg.family()
    if fam.dim != int(np.prod(cfg.ensemble.dims)):
        raise DimensionError(f"charge dimension {fam.dim} does not match ensemble dims {cfg.ensemble.dims}")


def run_ne_values(cfg: ExperimentConfig, workers: int | None = None) -> np.ndarray:
    """NE of every sample, in sample-index order.

    Sample ``i`` is drawn from stream ``(seed, i)``, so the values are
    identical for every worker count.
    """
    _validate_pairing(cfg)
    workers = cfg.workers if workers is None else int(workers)
    d = cfg.to_dict()
    jobs = [(d, s, min(s + CHUNK, cfg.samples)) for s in range(0, cfg.samples, CHUNK)]
    if not jobs:
        return np.zeros(0)
    if workers <= 1 or len(jobs) == 1:
        parts = [_ne_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_ne_chunk, jobs))
    return np.concatenate(parts)


def run_ne_distribution(cfg: ExperimentConfig, workers: int | None = None) -> DistributionStats:
    return summarize(run_ne_values(cfg, workers), cfg.histogram_bins)


@dataclass
class SweepReport:
    rows: list[tuple[tuple[int, ...], DistributionStats]]
    std_decreasing: bool
    means_positive: bool
    guard_sigmas: float = 2.0

    def to_dict(self) -> dict:
        return {
            "std_decreasing": self.std_decreasing,
            "means_positive": self.means_positive,
            "guard_sigmas": self.guard_sigmas,
            "rows": [{"dims": list(d), **s.to_dict()} for d, s in self.rows],
        }


def std_standard_error(stats: DistributionStats) -> float:
    """Standard error of the sample standard deviation (from the sample kurtosis)."""
    v = stats.samples
    n = v.size
    if n < 4 or stats.std == 0:
        return 0.0
    m4 = np.mean((v - v.mean()) ** 4)
    var = stats.std**2
    var_of_var = (m4 - var**2 * (n - 3) / (n - 1)) / n
    return float(math.sqrt(max(var_of_var, 0.0)) / (2 * stats.std))


def concentration_sweep(dims_list: Sequence[Sequence[int]], template: ExperimentConfig, workers=None, guard_sigmas: float = 2.0) -> SweepReport:
    """Run ``template`` at each dims and report the concentration trend.

    The std is called decreasing when each step drops by more than
    ``guard_sigmas`` combined standard errors of the two stds.
    """
    if len(dims_list) < 2:
        raise ConfigError("a sweep needs at least two dimension settings")
    rows = []
    for dims in dims_list:
        stats = run_ne_distribution(template.with_dims(dims), workers)
        rows.append((tuple(int(x) for x in dims), stats))
    dec = True
    for (_, a), (_, b) in zip(rows[:-1], rows[1:]):
        band = guard_sigmas * math.hypot(std_standard_error(a), std_standard_error(b))
        if not b.std < a.std - band:
            dec = False
    pos = all(s.mean > 0 for _, s in rows)
    return SweepReport(rows, dec, pos, guard_sigmas)


# --- chi distribution ------------------------------------------------------------------


@dataclass
class ChiFit:
    k: float
    scale: float
    goodness: float  # Kolmogorov-Smirnov statistic
    converged: bool = True
    iterations: int = 0
    n_used: int = 0
    n_dropped: int = 0

    def pdf(self, x) -> np.ndarray:
        return chi_pdf(x, self.k, self.scale)

    def normalization(self) -> float:
        val, _ = scipy.integrate.quad(self.pdf, 0.0, np.inf, limit=200)
        return float(val)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "scale": self.scale,
            "ks_statistic": self.goodness,
            "converged": self.converged,
            "iterations": self.iterations,
            "n_used": self.n_used,
            "n_dropped": self.n_dropped,
        }


def chi_pdf(x, k: float, s: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    z = np.clip(x, 0.0, None) / s
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = (1 - k / 2) * math.log(2) - scipy.special.gammaln(k / 2) + (k - 1) * np.log(z) - z**2 / 2 - math.log(s)
        p = np.exp(logp)
    return np.where(x > 0, p, 0.0 if k > 1 else (np.inf if k < 1 else math.sqrt(2 / math.pi) / s))


def _chi_mean_ratio(k: float) -> float:
    # E[X] / sqrt(E[X^2]) for X ~ chi_k
    return math.sqrt(2.0 / k) * math.exp(scipy.special.gammaln((k + 1) / 2) - scipy.special.gammaln(k / 2))


def chi_moment_k(mean: float, second: float) -> float:
    """Order ``k`` matching ``E[X]^2 / E[X^2]`` of a chi law."""
    target = mean / math.sqrt(second)
    lo, hi = 1e-3, 1e6
    if target <= _chi_mean_ratio(lo):
        return lo
    if target >= _chi_mean_ratio(hi):
        return hi
    return float(scipy.optimize.brentq(lambda k: _chi_mean_ratio(k) - target, lo, hi, xtol=1e-12))


def chi_fit(samples, max_iter: int = 200, rtol: float = 1e-10, zero_tol: float = 1e-8) -> ChiFit:
    """Fit a scaled chi law by moment matching refined with profile maximum likelihood.

    For fixed order ``k`` the MLE scale is ``sqrt(mean(x^2) / k)``; the profile
    score in ``k`` reduces to ``log(k/2) - digamma(k/2) = log mean(x^2) - 2 mean(log x)``,
    which is solved by safeguarded Newton steps from the moment estimate.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if np.any(x < -zero_tol):
        raise NumericalError(f"chi_fit needs non-negative samples (min {x.min():.3e})")
    pos = x[x > zero_tol]
    dropped = int(x.size - pos.size)
    if pos.size < 100:
        raise NumericalError(f"chi_fit needs at least 100 positive samples, got {pos.size}")
    if np.ptp(pos) <= 1e-12 * max(1.0, float(np.max(pos))):
        raise NumericalError("chi_fit: samples have degenerate (zero) variance")

    m1, m2 = float(pos.mean()), float(np.mean(pos**2))
    k0 = chi_moment_k(m1, m2)
    rhs = math.log(m2) - 2 * float(np.mean(np.log(pos)))  # > 0 by Jensen

    def g(k):
        return math.log(k / 2) - scipy.special.digamma(k / 2) - rhs

    def loglik(k):
        s = math.sqrt(m2 / k)
        return float(np.sum(np.log(chi_pdf(pos, k, s))))

    k, converged, it = k0, False, 0
    ll = loglik(k)
    for it in range(1, max_iter + 1):
        dg = 1 / k - 0.5 * scipy.special.polygamma(1, k / 2)
        step = -g(k) / dg
        k_new = k + step
        if k_new <= 0:
            k_new = k / 2
        ll_new = loglik(k_new)
        # g is monotone, so the Newton iterate cannot overshoot into a worse likelihood for long
        done = abs(ll_new - ll) <= rtol * max(1.0, abs(ll))
        k, ll = k_new, ll_new
        if done:
            converged = True
            break
    if not converged or not np.isfinite(k):
        k = k0
    s = math.sqrt(m2 / k)
    ks = float(scipy.stats.kstest(pos, "chi", args=(k, 0.0, s)).statistic)
    return ChiFit(float(k), float(s), ks, converged, it, int(pos.size), dropped)


# --- Levy bound diagnostic -------------------------------------------------------------


def levy_bound(alpha, D: float) -> np.ndarray:
    """``2 exp(-c D alpha^2 / eta^2)`` with ``eta = 4 sqrt(2) log2 D``."""
    eta = 4 * math.sqrt(2) * math.log2(D)
    return 2 * np.exp(-LEVY_C * D * np.asarray(alpha, dtype=float) ** 2 / eta**2)


@dataclass
class LevyReport:
    D_assumed: float
    alphas: np.ndarray
    empirical: np.ndarray
    bound: np.ndarray
    largest_D_not_violated: float  # inf when no D is ever violated

    @property
    def ok(self) -> bool:
        return bool(np.all(self.empirical <= self.bound))

    def to_dict(self) -> dict:
        return {
            "D_assumed": self.D_assumed,
            "rows": [
                {"alpha": float(a), "empirical_tail": float(e), "bound": float(b)}
                for a, e, b in zip(self.alphas, self.empirical, self.bound)
            ],
            "bound_holds": self.ok,
            # null when no finite D is found (never violated, or violated already at D = 3)
            "largest_D_not_violated": self.largest_D_not_violated if math.isfinite(self.largest_D_not_violated) else None,
        }


def empirical_tails(values, alphas) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    dev = np.abs(v - v.mean())
    return np.array([np.mean(dev > a) for a in np.asarray(alphas, dtype=float)])


def levy_bound_check(stats: DistributionStats, D_assumed: float, alpha_grid=None) -> LevyReport:
    """Compare empirical NE tails to the Levy-type concentration bound.

    Also bisects for the largest D (D >= 3) at which the bound still holds at
    every alpha on the grid; the bound tightens as D grows.
    """
    if stats.samples is None or stats.samples.size == 0:
        raise ConfigError("levy_bound_check needs the raw samples")
    if alpha_grid is None:
        alpha_grid = np.linspace(0.0, max(stats.max - stats.mean, stats.mean - stats.min) * 1.5, 16)
    alphas = np.asarray(alpha_grid, dtype=float)
    emp = empirical_tails(stats.samples, alphas)
    bound = levy_bound(alphas, D_assumed)

    def holds(D):
        return bool(np.all(emp <= levy_bound(alphas, D)))

    lo = 3.0
    if not holds(lo):
        largest = float("nan")
    else:
        hi = lo
        while holds(hi) and hi < 1e300:
            lo, hi = hi, hi * 16
        if holds(hi):
            largest = float("inf")
        else:
            for _ in range(200):
                mid = math.sqrt(lo * hi)
                if holds(mid):
                    lo = mid
                else:
                    hi = mid
                if hi / lo < 1 + 1e-9:
                    break
            largest = lo
    return LevyReport(float(D_assumed), alphas, emp, bound, largest)


def results_document(cfg: ExperimentConfig, stats: DistributionStats, fit: ChiFit | None, wall_time: float, extra: dict | None = None) -> dict:
    doc = {
        "config": cfg.to_dict(),
        "stats": stats.to_dict(),
        "chi_fit": fit.to_dict() if fit is not None else None,
        "metadata": {
            "code_version": __version__,
            "mixture_size": cfg.ensemble.mixture_size() or "(d_A*d_B)^2",
            "simplex_weights": "flat (Dirichlet(1))",
        },
        "wall_time": wall_time,
    }
    if extra:
        doc.update(extra)
    return doc


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0
