"""Distribution fits, saving-model predictions, inequality metrics and equilibrium detection."""
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import LambdaOutOfRange, NotConverged, SampleTooSmall, TailTooSmall, ZeroVariance

MIN_SAMPLE = 100
MIN_TAIL = 50


@dataclass(frozen=True)
class WealthSample:
    values: np.ndarray
    step: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size == 0:
            raise ValueError("a wealth sample needs at least one value")
        if np.any(v < 0):
            raise ValueError("wealth values must be nonnegative")
        object.__setattr__(self, "values", v)


def _values(sample):
    return sample.values if isinstance(sample, WealthSample) else np.asarray(sample, dtype=float).ravel()


def _check_lambda(lam):
    if not 0.0 < lam < 1.0:
        raise LambdaOutOfRange(f"saving propensity {lam!r} outside (0, 1)")


def effective_dimension(lam):
    """Half the effective dimension, ``(1 + 2 lam) / (1 - lam)``: the Gamma shape."""
    _check_lambda(lam)
    return (1.0 + 2.0 * lam) / (1.0 - lam)


def temperature(lam, mean_wealth):
    """Equipartition temperature ``<F> (1 - lam) / (1 + 2 lam)``; the Gamma scale."""
    _check_lambda(lam)
    if not mean_wealth > 0:
        raise ValueError("mean wealth must be positive")
    return mean_wealth * (1.0 - lam) / (1.0 + 2.0 * lam)


@dataclass(frozen=True)
class GammaPrediction:
    lam: float
    D_half: float
    T_lambda: float
    skewness: float
    excess_kurtosis: float

    @classmethod
    def for_lambda(cls, lam, mean_wealth):
        d_half = effective_dimension(lam)
        dim = 2.0 * d_half
        return cls(lam, d_half, temperature(lam, mean_wealth), 2.0 * math.sqrt(2.0) / math.sqrt(dim), 12.0 / dim)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ExponentialFit:
    mean: float
    ks_statistic: float

    def __iter__(self):
        return iter((self.mean, self.ks_statistic))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class GammaFit:
    shape: float
    scale: float

    def __iter__(self):
        return iter((self.shape, self.scale))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ParetoFit:
    alpha: float
    x_min: float
    n_tail: int
    power_law: bool = True

    def to_dict(self):
        return asdict(self)


def fit_exponential(sample):
    """Maximum-likelihood mean and KS distance to ``Exp(mean)``."""
    x = _values(sample)
    if x.size < MIN_SAMPLE:
        raise SampleTooSmall(f"{x.size} values, need {MIN_SAMPLE}")
    mean = float(x.mean())
    if mean <= 0:
        return ExponentialFit(mean, 1.0)
    ks = stats.kstest(x, "expon", args=(0.0, mean)).statistic
    return ExponentialFit(mean, float(ks))


def fit_gamma(sample):
    """Method-of-moments Gamma fit: ``shape = mean^2 / var``, ``scale = var / mean``."""
    x = _values(sample)
    if x.size < MIN_SAMPLE:
        raise SampleTooSmall(f"{x.size} values, need {MIN_SAMPLE}")
    mean = float(x.mean())
    var = float(x.var())
    if var == 0.0 or mean <= 0.0:
        raise ZeroVariance("sample has no spread")
    return GammaFit(mean * mean / var, var / mean)


def _hill(x, x_min):
    tail = x[x >= x_min]
    logs = np.log(tail / x_min).sum()
    return (tail.size / logs if logs > 0 else math.inf), tail.size


def fit_pareto_tail(sample, x_min=None, stability_tol=0.25):
    """Hill estimate of the tail exponent above ``x_min`` (default: 80th percentile).

    The estimate is repeated above the tail's median; if the two disagree by
    more than ``stability_tol`` relative, ``power_law`` is set to False.
    """
    x = _values(sample)
    if x_min is None:
        x_min = float(np.quantile(x, 0.8))
    if not x_min > 0:
        raise TailTooSmall("tail threshold must be positive")
    alpha, n_tail = _hill(x, x_min)
    if n_tail < MIN_TAIL:
        raise TailTooSmall(f"{n_tail} values above {x_min!r}, need {MIN_TAIL}")
    upper = float(np.median(x[x >= x_min]))
    alpha_upper, n_upper = _hill(x, upper)
    stable = n_upper >= MIN_TAIL // 2 and math.isfinite(alpha) and abs(alpha_upper - alpha) <= stability_tol * alpha
    return ParetoFit(float(alpha), float(x_min), int(n_tail), bool(stable))


def top_share(sample, q):
    """Share of the total held by the richest ``ceil(q n)`` values."""
    x = _values(sample)
    if not 0.0 < q <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    total = x.sum()
    if total <= 0:
        raise ValueError("sample total must be positive")
    m = math.ceil(q * x.size - 1e-9)
    if m >= x.size:
        return 1.0
    return float(np.sort(x)[::-1][:m].sum() / total)


def gini(sample):
    """Mean absolute difference over twice the mean, via the sorted-rank form."""
    x = np.sort(_values(sample))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    total = x.sum()
    if total == 0:
        return 0.0
    ranks = np.arange(1, n + 1)
    return float(np.sum((2 * ranks - n - 1) * x) / (n * total))


def histogram(sample, bins=50, range=None):
    """``(edges, counts, density)`` for CSV export."""
    x = _values(sample)
    counts, edges = np.histogram(x, bins=bins, range=range)
    widths = np.diff(edges)
    density = counts / (counts.sum() * widths) if counts.sum() else np.zeros_like(widths)
    return edges, counts, density


def _ecdf_l1(a, b, scale):
    """L1 distance between the empirical CDFs of ``a`` and ``b``, divided by ``scale``."""
    grid = np.union1d(a, b)
    if grid.size < 2:
        return 0.0
    fa = np.searchsorted(np.sort(a), grid[:-1], side="right") / a.size
    fb = np.searchsorted(np.sort(b), grid[:-1], side="right") / b.size
    return float(np.sum(np.abs(fa - fb) * np.diff(grid)) / scale)


def window_distances(snapshots, window):
    """Distance between pooled snapshot blocks ``[i, i+w)`` and ``[i+w, i+2w)`` for each ``i``."""
    snaps = np.asarray(snapshots, dtype=float)
    if snaps.ndim != 2:
        raise ValueError("snapshots must be a 2-d array (snapshot, agent)")
    if window < 1 or len(snaps) < 2 * window:
        raise ValueError(f"need at least {2 * window} snapshots")
    scale = float(np.mean(snaps)) or 1.0
    out = []
    for i in range(len(snaps) - 2 * window + 1):
        out.append(_ecdf_l1(snaps[i:i + window].ravel(), snaps[i + window:i + 2 * window].ravel(), scale))
    return np.array(out)


def equilibrium_detect(snapshots, window, tol):
    """Earliest snapshot index after which the windowed distribution stops moving.

    Returns the first ``i`` such that the distance between consecutive
    windows (see :func:`window_distances`, relative to the mean wealth) stays
    below ``tol`` for ``window`` consecutive checks, or for all remaining
    checks if fewer are left. Raises :class:`NotConverged` otherwise.
    """
    d = window_distances(snapshots, window)
    ok = d < tol
    for i in range(len(d)):
        if ok[i:i + window].all():
            return i
    raise NotConverged(f"distribution still moving: last distance {d[-1]:.3g} vs tol {tol}")
