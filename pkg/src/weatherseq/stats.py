"""Distribution fitting, goodness-of-fit tests and time-series diagnostics.

Fitting routines are written out here; scipy supplies only the special
functions and reference CDFs (normal, Weibull, beta, chi-square,
Kolmogorov) that the tests evaluate against.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize, special
from scipy import stats as sps

log = logging.getLogger(__name__)

FAMILIES = ("gaussian", "weibull", "bounded-beta")
MIN_SAMPLE = 8
ALPHA = 0.05
WEIBULL_TOL = 1e-8
WEIBULL_MAX_ITER = 100


class DegenerateSampleError(ValueError):
    """Sample with no spread, or otherwise unusable for fitting."""


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class FittedDistribution:
    family: str
    params: dict[str, float]
    n: int
    loglik: float = float("nan")

    def __post_init__(self) -> None:
        p = self.params
        if self.family == "gaussian":
            ok = p["std"] > 0
        elif self.family == "weibull":
            ok = p["shape"] > 0 and p["scale"] > 0
        elif self.family == "bounded-beta":
            ok = p["alpha"] > 0 and p["beta"] > 0 and p["lo"] < p["hi"]
        else:
            raise ValueError(f"unknown family {self.family!r}")
        if not ok:
            raise ValueError(f"invalid {self.family} parameters {p}")

    @property
    def n_fitted(self) -> int:
        """Parameters estimated from data (a declared beta support is not)."""
        return 2

    def frozen(self):
        cached = self.__dict__.get("_frozen")
        if cached is not None:
            return cached
        p = self.params
        if self.family == "gaussian":
            f = sps.norm(loc=p["mean"], scale=p["std"])
        elif self.family == "weibull":
            f = sps.weibull_min(p["shape"], scale=p["scale"])
        else:
            f = sps.beta(p["alpha"], p["beta"], loc=p["lo"], scale=p["hi"] - p["lo"])
        object.__setattr__(self, "_frozen", f)  # cache; not a dataclass field
        return f

    def cdf(self, x):
        return self.frozen().cdf(x)

    def ppf(self, q):
        return self.frozen().ppf(q)

    def logpdf(self, x):
        return self.frozen().logpdf(x)

    def mean(self) -> float:
        return float(self.frozen().mean())

    def std(self) -> float:
        return float(self.frozen().std())

    def sample(self, rng: np.random.Generator, size=None):
        p = self.params
        if self.family == "gaussian":
            return rng.normal(p["mean"], p["std"], size)
        if self.family == "weibull":
            return p["scale"] * rng.weibull(p["shape"], size)
        return p["lo"] + (p["hi"] - p["lo"]) * rng.beta(p["alpha"], p["beta"], size)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": dict(self.params), "n": self.n,
                "loglik": self.loglik}

    @classmethod
    def from_dict(cls, d: dict) -> "FittedDistribution":
        return cls(d["family"], {k: float(v) for k, v in d["params"].items()}, int(d["n"]),
                   float(d.get("loglik", float("nan"))))


def _as_sample(sample) -> np.ndarray:
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < MIN_SAMPLE:
        raise InsufficientDataError(f"need at least {MIN_SAMPLE} values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def _weibull_shape_newton(y: np.ndarray) -> float | None:
    """Root of the Weibull MLE shape equation for a sample scaled to mean 1.

    Newton steps safeguarded by bisection on a bracket; returns None when
    the iteration budget runs out.
    """
    ly = np.log(y)
    mean_ly = ly.mean()

    def g(k):
        yk = y ** k
        s0 = yk.sum()
        s1 = (yk * ly).sum()
        s2 = (yk * ly * ly).sum()
        return s1 / s0 - 1.0 / k - mean_ly, (s2 * s0 - s1 * s1) / (s0 * s0) + 1.0 / (k * k)

    k = 1.2825 / ly.std()
    lo, hi = 0.0, math.inf
    for _ in range(WEIBULL_MAX_ITER):
        val, deriv = g(k)
        if val < 0:
            lo = k
        else:
            hi = k
        step = val / deriv
        nxt = k - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * k
        if abs(nxt - k) < WEIBULL_TOL:
            return nxt
        k = nxt
    return None


def _weibull_shape_moments(y: np.ndarray) -> float:
    cv2 = y.var() / y.mean() ** 2

    def h(k):
        return special.gamma(1 + 2 / k) / special.gamma(1 + 1 / k) ** 2 - 1 - cv2

    return optimize.brentq(h, 0.05, 200.0)


def fit_weibull(sample) -> FittedDistribution:
    x = _as_sample(sample)
    if np.any(x < 0):
        raise ValueError("weibull fit requires non-negative values")
    pos = x[x > 0]
    if pos.size < x.size:
        log.warning("weibull fit: %d zero values excluded", x.size - pos.size)
    if pos.size < MIN_SAMPLE:
        raise InsufficientDataError("too few positive values for a weibull fit")
    if np.ptp(pos) == 0:
        raise DegenerateSampleError("weibull fit of a constant sample")
    scale0 = pos.mean()
    y = pos / scale0
    k = _weibull_shape_newton(y)
    if k is None:
        log.warning("weibull MLE did not converge; using method of moments")
        k = _weibull_shape_moments(y)
    lam = scale0 * float(np.mean(y ** k)) ** (1.0 / k)
    fit = FittedDistribution("weibull", {"shape": float(k), "scale": float(lam)}, int(x.size))
    return FittedDistribution("weibull", fit.params, fit.n, float(fit.logpdf(pos).sum()))


def fit_gaussian(sample) -> FittedDistribution:
    x = _as_sample(sample)
    sd = float(x.std())
    if sd == 0:
        raise DegenerateSampleError("gaussian fit of a constant sample")
    fit = FittedDistribution("gaussian", {"mean": float(x.mean()), "std": sd}, int(x.size))
    return FittedDistribution("gaussian", fit.params, fit.n, float(fit.logpdf(x).sum()))


def fit_bounded_beta(sample, support: tuple[float, float]) -> FittedDistribution:
    """Beta law on a declared support: moments start, likelihood polish."""
    x = _as_sample(sample)
    lo, hi = map(float, support)
    if not lo < hi:
        raise ValueError("support bounds must increase")
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError(f"values outside support [{lo}, {hi}]")
    if np.ptp(x) == 0:
        raise DegenerateSampleError("beta fit of a constant sample")
    eps = 1e-9
    u = np.clip((x - lo) / (hi - lo), eps, 1 - eps)
    m, v = u.mean(), u.var()
    common = m * (1 - m) / v - 1
    a0, b0 = (m * common, (1 - m) * common) if common > 0 else (1.0, 1.0)
    slu, sl1u = np.log(u).sum(), np.log1p(-u).sum()
    n = u.size

    def nll(theta):
        a, b = np.exp(theta)
        ll = -n * special.betaln(a, b) + (a - 1) * slu + (b - 1) * sl1u
        dig = special.digamma(a + b)
        ga = n * (dig - special.digamma(a)) + slu
        gb = n * (dig - special.digamma(b)) + sl1u
        return -ll, -np.array([ga * a, gb * b])

    res = optimize.minimize(nll, np.log([a0, b0]), jac=True, method="L-BFGS-B",
                            bounds=[(-7, 9), (-7, 9)])
    a, b = np.exp(res.x) if res.success else (a0, b0)
    params = {"alpha": float(a), "beta": float(b), "lo": lo, "hi": hi}
    fit = FittedDistribution("bounded-beta", params, int(n))
    return FittedDistribution("bounded-beta", params, fit.n, float(fit.logpdf(x).sum()))


def fit_distribution(family: str, sample, support: tuple[float, float] | None = None) -> FittedDistribution:
    """Maximum-likelihood fit of ``family`` to ``sample``.

    ``support`` is required for the bounded-beta family.
    """
    if family == "gaussian":
        return fit_gaussian(sample)
    if family == "weibull":
        return fit_weibull(sample)
    if family == "bounded-beta":
        if support is None:
            raise ValueError("bounded-beta needs a support")
        return fit_bounded_beta(sample, support)
    raise ValueError(f"unknown family {family!r}")


def best_bounded_beta(sample, outer: tuple[float, float] = (0.0, 1.2),
                      pad: float = 0.1) -> FittedDistribution:
    """Bounded-beta fit whose support, among a few candidates, gives the lowest KS D.

    Candidates are the outer physical range, ``[0, 1]`` and the sample range
    widened by ``pad`` times its width on each side (clipped to ``outer``).
    """
    x = _as_sample(sample)
    width = np.ptp(x)
    tight = (max(outer[0], x.min() - pad * width), min(outer[1], x.max() + pad * width))
    candidates = [outer, (0.0, 1.0), tight]
    best = None
    for sup in candidates:
        if x.min() < sup[0] or x.max() > sup[1] or not sup[0] < sup[1]:
            continue
        fit = fit_bounded_beta(x, sup)
        d = ks_test(x, fit).statistic
        if best is None or d < best[0]:
            best = (d, fit)
    return best[1]


# --- goodness of fit ---------------------------------------------------------

@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float
    passed: bool
    n_bins: int


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    passed: bool


def chi_square_statistic(observed, expected) -> float:
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    return float(((observed - expected) ** 2 / expected).sum())


def chi_square_test(sample, dist: FittedDistribution, n_bins: int = 20,
                    alpha: float = ALPHA) -> ChiSquareResult:
    """Pearson test over bins of equal probability under ``dist``.

    Bins are merged (their number reduced) until each expects at least
    five observations.
    """
    x = np.asarray(sample, dtype=float).ravel()
    n = x.size
    n_bins = min(n_bins, n // 5)
    dof = n_bins - 1 - dist.n_fitted
    if dof < 1:
        raise InsufficientDataError(f"{n} values cannot support a chi-square test on {dist.family}")
    u = np.clip(np.asarray(dist.cdf(x), dtype=float), 0.0, 1.0)
    idx = np.minimum((u * n_bins).astype(int), n_bins - 1)
    observed = np.bincount(idx, minlength=n_bins)
    stat = chi_square_statistic(observed, np.full(n_bins, n / n_bins))
    p = float(sps.chi2.sf(stat, dof))
    return ChiSquareResult(stat, dof, p, p >= alpha, n_bins)


def ks_test(sample, dist, alpha: float = ALPHA) -> KsResult:
    """One-sample Kolmogorov-Smirnov test against ``dist.cdf``.

    The p-value uses the asymptotic Kolmogorov law with Stephens'
    small-sample correction ``(sqrt(n) + 0.12 + 0.11/sqrt(n)) * D``. It
    ignores that parameters were estimated, so it is conservative for
    self-fits.
    """
    x = np.sort(_as_sample(sample))
    n = x.size
    cdf = np.asarray(dist.cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max((i / n - cdf).max(), (cdf - (i - 1) / n).max()))
    d = min(max(d, 0.0), 1.0)
    sqn = math.sqrt(n)
    p = float(sps.kstwobign.sf((sqn + 0.12 + 0.11 / sqn) * d))
    return KsResult(d, p, p >= alpha)


# --- time series -------------------------------------------------------------

def autocorrelation(series, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelation r(0..max_lag)."""
    x = np.asarray(series, dtype=float).ravel()
    if x.size <= max_lag + 1:
        raise InsufficientDataError("series shorter than max_lag + 2")
    dev = x - x.mean()
    denom = float(dev @ dev)
    if denom == 0:
        raise DegenerateSampleError("autocorrelation of a constant series")
    n = x.size
    return np.array([1.0] + [float(dev[:n - k] @ dev[k:]) / denom for k in range(1, max_lag + 1)])


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    r_squared: float
    residual_std: float
    slope_stderr: float
    n: int

    def predict(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=float)


def linear_regression(x, y) -> RegressionFit:
    """Ordinary least squares line ``y = intercept + slope * x``."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size or x.size < 3:
        raise ValueError("x and y need equal lengths of at least 3")
    xd = x - x.mean()
    sxx = float(xd @ xd)
    if sxx == 0:
        raise DegenerateSampleError("regression on a constant x")
    slope = float(xd @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - intercept - slope * x
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    s = math.sqrt(ss_res / (x.size - 2)) if x.size > 2 else 0.0
    return RegressionFit(slope, intercept, float(min(max(r2, 0.0), 1.0)), s,
                         s / math.sqrt(sxx), int(x.size))


@dataclass(frozen=True)
class PcaResult:
    mean_profile: np.ndarray
    hours: np.ndarray  # retained hour columns
    column_std: np.ndarray  # std of each retained column
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # rows are components over the retained hours
    explained: np.ndarray
    scores: np.ndarray  # n_days x n_components

    def reconstruct(self, scores) -> np.ndarray:
        """24-hour profile for given component scores (missing trailing scores = 0)."""
        scores = np.atleast_1d(np.asarray(scores, dtype=float))
        prof = self.mean_profile.copy()
        if self.hours.size:
            k = scores.size
            z = scores @ self.eigenvectors[:k]
            prof[self.hours] += z * self.column_std
        return prof


def pca_daily_profiles(days) -> PcaResult:
    """Principal components of daily 24-hour profiles on the correlation matrix.

    Hour columns with no variance (night-time radiation, identical days)
    are left out of the decomposition with a diagnostic; they keep their
    mean value in reconstructions.
    """
    m = np.asarray(days, dtype=float)
    if m.ndim != 2 or m.shape[1] != 24:
        raise ValueError("expected an n_days x 24 matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("profiles contain missing values")
    if m.shape[0] < 24:
        log.warning("pca on %d days: fewer days than hours, components are unstable", m.shape[0])
    mean = m.mean(axis=0)
    std = m.std(axis=0)
    keep = np.flatnonzero(std > 1e-12 * max(1.0, float(np.abs(m).max())))
    if keep.size < 24:
        log.info("pca: %d constant hour columns excluded", 24 - keep.size)
    if keep.size == 0:
        empty = np.empty((0, 0))
        return PcaResult(mean, keep, np.empty(0), np.empty(0), empty, np.empty(0),
                         np.empty((m.shape[0], 0)))
    z = (m[:, keep] - mean[keep]) / std[keep]
    corr = z.T @ z / m.shape[0]
    vals, vecs = np.linalg.eigh(corr)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order].T
    # sign convention: each component has a non-negative sum of loadings
    signs = np.where(vecs.sum(axis=1) < 0, -1.0, 1.0)
    vecs = vecs * signs[:, None]
    return PcaResult(mean, keep, std[keep], vals, vecs, vals / vals.sum(), z @ vecs.T)


def typical_profiles(pca: PcaResult, spread: float = 0.5) -> tuple[list[np.ndarray], np.ndarray]:
    """Mean profile and mean +/- first component, with day-share weights.

    Days with a first score beyond ``spread`` standard deviations go to the
    +/- shapes, the rest to the mean shape. Shapes that attract no day are
    dropped. Degenerate input returns the mean profile alone.
    """
    if pca.eigenvalues.size == 0 or pca.eigenvalues[0] <= 0:
        return [pca.mean_profile.copy()], np.array([1.0])
    sd = math.sqrt(pca.eigenvalues[0])
    s = pca.scores[:, 0] / sd
    groups = [np.abs(s) <= spread, s > spread, s < -spread]
    shapes, weights = [], []
    for mask in groups:
        if mask.any():
            shapes.append(pca.reconstruct([pca.scores[mask, 0].mean()]))
            weights.append(mask.mean())
    w = np.asarray(weights, dtype=float)
    return shapes, w / w.sum()


@dataclass(frozen=True)
class CoherenceResult:
    frequencies: np.ndarray  # cycles per hour
    coherence: np.ndarray
    n_segments: int
    cutoff: float | None

    def at(self, frequency: float) -> float:
        return float(self.coherence[np.argmin(np.abs(self.frequencies - frequency))])


def moving_average(x, window: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if window <= 1:
        return x.copy()
    return np.convolve(x, np.ones(window) / window, mode="valid")


def coherence(x, y, segment_len: int = 256, lowpass_cutoff: float | None = None) -> CoherenceResult:
    """Welch magnitude-squared coherence of two hourly series.

    Optional moving-average pre-filter with a window of ``1/lowpass_cutoff``
    hours, then Hann-windowed, mean-removed segments with 50 % overlap.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("series lengths differ")
    if segment_len < 4 or segment_len & (segment_len - 1):
        raise ValueError("segment_len must be a power of two >= 4")
    if x.size < 4 * segment_len:
        raise InsufficientDataError(f"need at least {4 * segment_len} samples")
    if lowpass_cutoff:
        window = int(round(1.0 / lowpass_cutoff))
        x, y = moving_average(x, window), moving_average(y, window)
    step = segment_len // 2
    starts = range(0, x.size - segment_len + 1, step)
    win = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(segment_len) / segment_len)
    sxx = syy = 0.0
    sxy = 0.0j
    for s in starts:
        xs = x[s:s + segment_len]
        ys = y[s:s + segment_len]
        if np.ptp(xs) == 0 or np.ptp(ys) == 0:
            raise DegenerateSampleError(f"zero-variance segment at sample {s}")
        fx = np.fft.rfft((xs - xs.mean()) * win)
        fy = np.fft.rfft((ys - ys.mean()) * win)
        sxx = sxx + np.abs(fx) ** 2
        syy = syy + np.abs(fy) ** 2
        sxy = sxy + np.conj(fx) * fy
    denom = sxx * syy
    with np.errstate(invalid="ignore", divide="ignore"):
        coh = np.where(denom > 0, np.abs(sxy) ** 2 / denom, 0.0)
    return CoherenceResult(np.fft.rfftfreq(segment_len, d=1.0), np.clip(coh, 0.0, 1.0),
                           len(starts), lowpass_cutoff)


# --- export ------------------------------------------------------------------

@dataclass
class FitRecord:
    class_name: str
    season: str
    variable: str
    dist: FittedDistribution
    ks: KsResult | None = None
    chi2: ChiSquareResult | None = None
    extra: dict = field(default_factory=dict)


FIT_HEADER = ("class", "season", "variable", "family", "params", "n",
              "ks_D", "ks_pass", "chi2", "chi2_pass")


def evaluate_fit(class_name: str, season: str, variable: str, sample,
                 dist: FittedDistribution) -> FitRecord:
    rec = FitRecord(class_name, season, variable, dist, ks=ks_test(sample, dist))
    try:
        rec.chi2 = chi_square_test(sample, dist)
    except InsufficientDataError:
        pass
    return rec


def write_fit_csv(records: Iterable[FitRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(FIT_HEADER)
        for r in records:
            params = ";".join(f"{k}={v:.6g}" for k, v in r.dist.params.items())
            writer.writerow([r.class_name, r.season, r.variable, r.dist.family, params, r.dist.n,
                             f"{r.ks.statistic:.6f}" if r.ks else "",
                             int(r.ks.passed) if r.ks else "",
                             f"{r.chi2.statistic:.6f}" if r.chi2 else "",
                             int(r.chi2.passed) if r.chi2 else ""])


def read_fit_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if tuple(reader.fieldnames or ()) != FIT_HEADER:
            raise ValueError(f"{path}: not a fit file")
        rows = []
        for raw in reader:
            rows.append({
                "class": raw["class"], "season": raw["season"], "variable": raw["variable"],
                "family": raw["family"],
                "params": {k: float(v) for k, v in (kv.split("=") for kv in raw["params"].split(";"))},
                "n": int(raw["n"]),
                "ks_D": float(raw["ks_D"]) if raw["ks_D"] else None,
                "ks_pass": bool(int(raw["ks_pass"])) if raw["ks_pass"] else None,
                "chi2": float(raw["chi2"]) if raw["chi2"] else None,
                "chi2_pass": bool(int(raw["chi2_pass"])) if raw["chi2_pass"] else None})
        return rows


def summarize(values: Sequence[float]) -> dict[str, float]:
    v = np.asarray(values, dtype=float)
    return {"n": int(v.size), "mean": float(v.mean()), "std": float(v.std()),
            "min": float(v.min()), "max": float(v.max())}
