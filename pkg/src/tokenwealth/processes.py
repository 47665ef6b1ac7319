"""Deterministic paths and discrete-time stochastic processes on the step grid.

A path maps a step index ``k`` to a value. Closed forms are written in model
time ``t = k * dt``; tables are keyed by step index directly.

Stochastic processes are specifications only. :meth:`start` binds one to a
generator and returns a :class:`ProcessRun`, which draws lazily (one value per
step) and caches what it has drawn, so ``value(k)`` is the same whatever order
steps are requested in.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import ProcessExhausted


class Path:
    integer_valued = False

    def value(self, k, dt=1.0):
        raise NotImplementedError

    def length(self):
        """Number of defined steps, or ``None`` if unbounded."""
        return None


@dataclass(frozen=True)
class ConstantPath(Path):
    level: float

    def value(self, k, dt=1.0):
        return float(self.level)


@dataclass(frozen=True)
class LinearPath(Path):
    intercept: float
    slope: float

    def value(self, k, dt=1.0):
        return self.intercept + self.slope * (k * dt)


@dataclass(frozen=True)
class ExponentialPath(Path):
    initial: float
    rate: float

    def value(self, k, dt=1.0):
        return self.initial * math.exp(self.rate * k * dt)


@dataclass(frozen=True)
class SinusoidPath(Path):
    mean: float
    amplitude: float
    period: float
    phase: float = 0.0

    def value(self, k, dt=1.0):
        return self.mean + self.amplitude * math.sin(2 * math.pi * (k * dt) / self.period + self.phase)


@dataclass(frozen=True)
class TablePath(Path):
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def value(self, k, dt=1.0):
        if k < 0 or k >= len(self.values):
            raise ProcessExhausted(f"table path has {len(self.values)} steps, step {k} requested")
        return self.values[k]

    def length(self):
        return len(self.values)


def path_from_spec(spec):
    """Build a path from its scenario-file form.

    ``{"form": "table", "values": [...]}`` or ``{"form": "table", "values": {"0": v0, ...}}``;
    the closed forms are ``constant``, ``linear``, ``exponential`` and ``sinusoid``.
    """
    form = spec["form"]
    if form == "constant":
        return ConstantPath(spec["value"])
    if form == "linear":
        return LinearPath(spec.get("intercept", 0.0), spec["slope"])
    if form == "exponential":
        return ExponentialPath(spec["initial"], spec["rate"])
    if form == "sinusoid":
        return SinusoidPath(spec["mean"], spec["amplitude"], spec["period"], spec.get("phase", 0.0))
    if form == "table":
        values = spec["values"]
        if isinstance(values, dict):
            keys = sorted(int(k) for k in values)
            if keys != list(range(len(keys))):
                raise ValueError("table keys must be the contiguous steps 0..n-1")
            values = [values[str(k)] if str(k) in values else values[k] for k in keys]
        return TablePath(values)
    raise ValueError(f"unknown path form {form!r}")


class ProcessRun:
    def __init__(self, process, rng):
        self.process = process
        self.rng = rng
        self._cache = []
        self._state = process.initial_state()

    def value(self, k, dt=1.0):
        while len(self._cache) <= k:
            self._state, x = self.process.advance(self._state, len(self._cache), dt, self.rng)
            self._cache.append(x)
        return self._cache[k]

    def path(self, steps, dt=1.0):
        self.value(steps - 1, dt)
        return np.array(self._cache[:steps])


class Process:
    integer_valued = False

    def initial_state(self):
        return None

    def advance(self, state, k, dt, rng):
        """Return ``(new_state, value_at_step_k)``."""
        raise NotImplementedError

    def expected(self, k, dt=1.0):
        raise NotImplementedError

    def start(self, rng):
        return ProcessRun(self, rng)


@dataclass(frozen=True)
class GeometricBrownianProcess(Process):
    """Positive process with ``X_0 = initial`` and log-normal increments over ``dt``."""

    initial: float = 1.0
    drift: float = 0.0
    volatility: float = 0.0

    def initial_state(self):
        return None

    def advance(self, state, k, dt, rng):
        if state is None:
            return self.initial, self.initial
        z = rng.standard_normal()
        x = state * math.exp((self.drift - 0.5 * self.volatility ** 2) * dt + self.volatility * math.sqrt(dt) * z)
        return x, x

    def expected(self, k, dt=1.0):
        return self.initial * math.exp(self.drift * k * dt)


@dataclass(frozen=True)
class PoissonProcess(Process):
    """Independent Poisson counts per step with a constant or path-valued mean."""

    rate: object = 1.0
    integer_valued = True

    def _rate(self, k, dt):
        return self.rate.value(k, dt) if isinstance(self.rate, Path) else float(self.rate)

    def advance(self, state, k, dt, rng):
        return state, int(rng.poisson(self._rate(k, dt)))

    def expected(self, k, dt=1.0):
        return self._rate(k, dt)


@dataclass(frozen=True)
class IIDProcess(Process):
    """Fresh independent draw from ``distribution`` every step."""

    distribution: object = None

    @property
    def integer_valued(self):
        return self.distribution.integer_valued

    def advance(self, state, k, dt, rng):
        return state, self.distribution.sample(rng)

    def expected(self, k, dt=1.0):
        return self.distribution.mean()


def process_from_spec(spec, distribution_factory=None):
    kind = spec["kind"]
    if kind == "gbm":
        return GeometricBrownianProcess(spec.get("initial", 1.0), spec.get("drift", 0.0), spec.get("volatility", 0.0))
    if kind == "poisson":
        rate = spec["rate"]
        return PoissonProcess(path_from_spec(rate) if isinstance(rate, dict) else float(rate))
    if kind == "iid":
        if distribution_factory is None:
            raise ValueError("iid process needs a distribution factory")
        return IIDProcess(distribution_factory(spec["distribution"]))
    raise ValueError(f"unknown process kind {kind!r}")
