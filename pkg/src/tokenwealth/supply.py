"""Maximum-supply laws, mint/burn allocation and discounting.

Supply laws are evaluated on the step grid: ``supply_at(model, k, dt)`` is the
supply at model time ``t = k * dt``, so ``r`` is a rate per unit of model time.
The stochastic law needs a realized path (:func:`realize`) because ``M(t)`` is
only defined once the run's draws are fixed.
"""
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, NonPositiveSupply, RateOutOfRange, ValidationError
from .processes import GeometricBrownianProcess, Path


class SupplyModel:
    M_initial: float

    def nominal(self, k, dt=1.0):
        """Deterministic (for stochastic laws: expected) supply at step ``k``."""
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantSupply(SupplyModel):
    M_initial: float

    def nominal(self, k, dt=1.0):
        return float(self.M_initial)


@dataclass(frozen=True)
class SimpleIncrement(SupplyModel):
    """``M(t) = (1 + r t) M_initial``: the same absolute change every step."""

    M_initial: float
    r: float

    def nominal(self, k, dt=1.0):
        return (1.0 + self.r * k * dt) * self.M_initial


@dataclass(frozen=True)
class CompoundIncrement(SupplyModel):
    """``M(t) = (1 + r)^t M_initial``, evaluated in closed form."""

    M_initial: float
    r: float

    def nominal(self, k, dt=1.0):
        return (1.0 + self.r) ** (k * dt) * self.M_initial


@dataclass(frozen=True)
class StochasticIncrement(SupplyModel):
    """``M(t) = R_t M_initial`` for a positive process with ``R_0 = 1``."""

    M_initial: float
    process: object = GeometricBrownianProcess()

    def nominal(self, k, dt=1.0):
        return self.process.expected(k, dt) * self.M_initial

    def expected_ratio(self, k, dt=1.0):
        return self.process.expected(k, dt)


@dataclass(frozen=True)
class GeneralSupply(SupplyModel):
    """Arbitrary supply path ``g`` with ``g(0) = M_initial``."""

    M_initial: float
    g: Path = None

    def nominal(self, k, dt=1.0):
        return self.g.value(k, dt)


@dataclass(frozen=True)
class SupplyPath:
    """Supply realized on the grid for one run."""

    values: np.ndarray
    dt: float = 1.0

    def __len__(self):
        return len(self.values)

    def at(self, k):
        return float(self.values[k])


def realize(model, steps, dt=1.0, rng=None):
    """Supply values at steps ``0..steps`` (inclusive) for one run."""
    if isinstance(model, StochasticIncrement):
        if rng is None:
            raise ValueError("stochastic supply needs a generator")
        ratios = model.process.start(rng).path(steps + 1, dt)
        values = ratios * model.M_initial
    else:
        values = np.array([model.nominal(k, dt) for k in range(steps + 1)], dtype=float)
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        bad = int(np.argmax(~(values > 0)))
        raise NonPositiveSupply(f"supply is {values[bad]!r} at step {bad}")
    return SupplyPath(values, dt)


def supply_at(model, k, dt=1.0, path=None):
    if path is not None:
        if k >= len(path):
            raise LengthMismatch(f"supply path has {len(path)} steps, step {k} requested")
        m = path.at(k)
    elif isinstance(model, StochasticIncrement):
        raise ValueError("stochastic supply is only defined on a realized path")
    else:
        m = model.nominal(k, dt)
    if not m > 0:
        raise NonPositiveSupply(f"supply is {m!r} at step {k}")
    return m


def validate_supply(model, horizon, dt=1.0):
    """Check rate ranges and positivity over steps ``0..horizon``.

    Raises :class:`RateOutOfRange` or :class:`NonPositiveSupply`; returns
    ``True`` otherwise.
    """
    if not model.M_initial > 0:
        raise NonPositiveSupply(f"M_initial must be positive, got {model.M_initial!r}")
    t_max = horizon * dt
    if isinstance(model, SimpleIncrement):
        if t_max > 0 and not model.r > -1.0 / t_max:
            raise RateOutOfRange(f"simple rate {model.r} must exceed {-1.0 / t_max} for horizon {t_max}")
    elif isinstance(model, CompoundIncrement):
        if not -1.0 < model.r < 1.0:
            raise RateOutOfRange(f"compound rate {model.r} must lie in (-1, 1)")
    elif isinstance(model, StochasticIncrement):
        proc = model.process
        if isinstance(proc, GeometricBrownianProcess):
            if proc.initial != 1.0:
                raise ValidationError("supply.process.initial", "R_0 must be 1")
            if proc.volatility < 0:
                raise RateOutOfRange("volatility must be nonnegative")
        # positivity of the other processes is their own construction's job
        return True
    elif isinstance(model, GeneralSupply):
        g0 = model.g.value(0, dt)
        if abs(g0 - model.M_initial) > 1e-12 * abs(model.M_initial):
            raise ValidationError("supply.g", "g(0) must equal M_initial", f"g(0)={g0}")
        n = model.g.length()
        if n is not None and n < horizon + 1:
            raise ValidationError("supply.g", "ProcessExhausted", f"table has {n} steps, horizon needs {horizon + 1}")
    for k in range(horizon + 1):
        m = model.nominal(k, dt)
        if not m > 0:
            raise NonPositiveSupply(f"supply is {m!r} at step {k}")
    return True


@dataclass(frozen=True)
class MintBurnAllocation:
    """Fractions of each supply change credited (or debited) to each category."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError("supply.allocation", "weights must be nonnegative and sum to 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def to_control_mechanism(cls, taxonomy):
        w = np.zeros(taxonomy.n)
        w[taxonomy.control_mechanism] = 1.0
        return cls(w)

    def split(self, delta):
        """Distribute ``delta``; the last weighted category absorbs the rounding residue."""
        g = self.weights * delta
        last = int(np.flatnonzero(self.weights)[-1])
        g[last] = 0.0
        g[last] = delta - g.sum()
        return g


def supply_delta(model, k, allocation, dt=1.0, path=None):
    """Per-category wealth change ``G`` between steps ``k-1`` and ``k``."""
    if k < 1:
        raise ValueError("supply_delta is defined from step 1 onwards")
    delta = supply_at(model, k, dt, path) - supply_at(model, k - 1, dt, path)
    return allocation.split(delta)


def discount_factor(model, k, dt=1.0, path=None):
    """``M_initial / M(t)``: rescales the total at step ``k`` back to the initial supply."""
    return model.M_initial / supply_at(model, k, dt, path)


@dataclass
class SymmetryReport:
    max_relative_drift: float
    worst_step: int
    max_discounted_error: float
    tol: float
    passed: bool

    def to_dict(self):
        return {
            "max_relative_drift": self.max_relative_drift,
            "worst_step": self.worst_step,
            "max_discounted_error": self.max_discounted_error,
            "tol": self.tol,
            "passed": self.passed,
        }


def check_time_translation(totals, model, tol=1e-9, dt=1.0, path=None):
    """Compare per-step wealth totals with the supply law.

    ``totals`` is the sequence of ``sum_j F(A_j, t)`` (or a trajectory's wealth
    matrix, which is summed row-wise). Stochastic laws are compared with the
    run's realized ``path``.
    """
    totals = np.asarray(totals, dtype=float)
    if totals.ndim == 2:
        totals = totals.sum(axis=1)
    if path is not None:
        if len(path) != len(totals):
            raise LengthMismatch(f"{len(totals)} totals against a supply path of {len(path)}")
        m = np.asarray(path.values, dtype=float)
    else:
        m = np.array([supply_at(model, k, dt) for k in range(len(totals))])
    drift = np.abs(totals - m) / m
    worst = int(np.argmax(drift))
    discounted = np.abs(totals * (model.M_initial / m) - model.M_initial) / model.M_initial
    max_drift = float(drift[worst])
    return SymmetryReport(max_drift, worst, float(discounted.max()), tol, bool(max_drift <= tol))


def check_expected_supply(final_totals, model, k, dt=1.0, n_sigma=3.0):
    """Ensemble check for stochastic laws: is the mean total at step ``k``
    within ``n_sigma`` standard errors of ``E[R_k] M_initial``?"""
    x = np.asarray(final_totals, dtype=float)
    expected = model.nominal(k, dt)
    se = x.std(ddof=1) / np.sqrt(len(x))
    z = (x.mean() - expected) / se if se > 0 else 0.0
    return {"mean": float(x.mean()), "expected": float(expected), "z": float(z), "passed": bool(abs(z) <= n_sigma)}
