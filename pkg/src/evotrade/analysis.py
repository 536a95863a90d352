"""Statistics over simulation outputs: diffusion exponent, distribution
comparisons, and per-species wealth tables.

The mean squared displacement of an ensemble of price series is
msd(t) = mean over series of (X_t - X_0)^2; its log-log slope against t is
the diffusion exponent gamma (1 for a random walk, 2 for ballistic
drift). The two-sample KS statistic and the bootstrap are the plain
textbook constructions, kept dependency-free so their tie-breaking and
resampling conventions are pinned by our own tests.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MsdFit:
    gamma: float
    intercept: float
    r2: float
    n_series: int
    n_points: int


def msd_curve(series) -> np.ndarray:
    """Mean squared displacement from each series' own starting point."""
    arrs = [np.asarray(s, dtype=np.float64) for s in series]
    if not arrs:
        raise ValueError("need at least one price series")
    length = min(len(a) for a in arrs)
    if length < 3:
        raise ValueError("series too short for a displacement fit")
    stacked = np.stack([a[:length] for a in arrs])
    if not np.isfinite(stacked).all():
        raise ValueError("price series contain non-finite values")
    disp = stacked - stacked[:, :1]
    return (disp * disp).mean(axis=0)


def msd_exponent(series) -> MsdFit:
    """Log-log OLS slope of the ensemble MSD against time.

    t = 0 and timesteps with zero displacement are excluded (their log is
    undefined); an ensemble whose displacement is zero everywhere (constant
    prices) is an error rather than gamma = 0.
    """
    msd = msd_curve(series)
    t = np.arange(1, len(msd))
    m = msd[1:]
    mask = m > 0
    if mask.sum() < 2:
        raise ValueError("degenerate ensemble: fewer than two nonzero displacements")
    x = np.log(t[mask])
    y = np.log(m[mask])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float((resid**2).sum()) / ss_tot
    return MsdFit(
        gamma=float(slope),
        intercept=float(intercept),
        r2=r2,
        n_series=len(series),
        n_points=int(mask.sum()),
    )


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|."""
    xa = np.sort(np.asarray(a, dtype=np.float64))
    xb = np.sort(np.asarray(b, dtype=np.float64))
    if xa.size == 0 or xb.size == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([xa, xb])
    fa = np.searchsorted(xa, pooled, side="right") / xa.size
    fb = np.searchsorted(xb, pooled, side="right") / xb.size
    return float(np.abs(fa - fb).max())


@dataclass(frozen=True)
class BootstrapResult:
    mean: float
    p_positive: float
    means: np.ndarray


def _resample_means(x, n_boot, rng):
    n = x.size
    out = np.empty(n_boot)
    # chunked so n_boot * n never allocates more than ~32 MB at once
    step = max(1, int(4_000_000 // max(n, 1)))
    for start in range(0, n_boot, step):
        stop = min(start + step, n_boot)
        idx = rng.integers(0, n, size=(stop - start, n))
        out[start:stop] = x[idx].mean(axis=1)
    return out


def bootstrap_mean(sample, n_boot: int = 10_000, rng=None) -> BootstrapResult:
    """Bootstrap distribution of the sample mean (same-size resamples)."""
    x = np.asarray(sample, dtype=np.float64)
    if x.size == 0:
        raise ValueError("sample must be nonempty")
    if n_boot < 1:
        raise ValueError("n_boot must be positive")
    rng = rng or np.random.default_rng(0)
    means = _resample_means(x, n_boot, rng)
    return BootstrapResult(
        mean=float(x.mean()),
        p_positive=float((means > 0).mean()),
        means=means,
    )


def bootstrap_compare(a, b, n_boot: int = 10_000, rng=None) -> float:
    """P(mean_a > mean_b) under independent bootstrap resampling."""
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    if xa.size == 0 or xb.size == 0:
        raise ValueError("both samples must be nonempty")
    rng = rng or np.random.default_rng(0)
    ma = _resample_means(xa, n_boot, rng)
    mb = _resample_means(xb, n_boot, rng)
    return float((ma > mb).mean())


def ecdf(values):
    """Right-continuous ECDF evaluated at the distinct sample points."""
    x = np.sort(np.asarray(values, dtype=np.float64))
    if x.size == 0:
        raise ValueError("values must be nonempty")
    xs, counts = np.unique(x, return_counts=True)
    f = np.cumsum(counts) / x.size
    return xs, f


def wealth_summary(records) -> list:
    """Rows (generation, species, mean, median) from generation records."""
    rows = []
    for rec in records:
        for species, (mean, median) in sorted(rec.species_stats().items()):
            rows.append((rec.generation, species, mean, median))
    return rows


# ---------------------------------------------------------------------- #
# CSV writers shared by the CLI


def write_wealth_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "species", "mean_wealth", "median_wealth"])
        for g, species, mean, median in wealth_summary(records):
            w.writerow([g, species, repr(float(mean)), repr(float(median))])


def write_prices_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "market", "timestep", "price"])
        for rec in records:
            for k, series in enumerate(rec.prices):
                for t, p in enumerate(series):
                    w.writerow([rec.generation, k, t, repr(float(p))])


def write_msd_csv(fits, path) -> None:
    """fits: iterable of (generation, MsdFit)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "gamma", "r2"])
        for g, fit in fits:
            w.writerow([g, repr(float(fit.gamma)), repr(float(fit.r2))])


def write_ecdf_csv(values, path) -> None:
    xs, f = ecdf(values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "F"])
        for xi, fi in zip(xs, f):
            w.writerow([repr(float(xi)), repr(float(fi))])
