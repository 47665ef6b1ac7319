"""Interaction-rate and rotation-rate matrices under the four parametrization modes.

Interaction rates are built from per-interaction payments ``iota = demand * price``:

    beta[a, b] = (M / dt) * sum(iota over interactions between a and b) / (F[a] * F[b])

with ``a < b``; ``beta[b, a] = -beta[a, b]``. A positive ``iota`` is a net
payment *into* the lower-indexed endpoint, so with this sign convention the
macro step moves exactly ``iota`` from payer to payee.

Rotation matrices are built from gross rates ``mu[a, b]`` (wealth moved from
``a`` to ``b`` per unit time and unit wealth of ``a``): the off-diagonal entry
lands in column ``a``, row ``b``, and the diagonal makes every column sum to 0.
"""
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import stats

from .errors import (
    InfeasibleSample,
    NegativeRotationRate,
    UnboundedExpectation,
    ValidationError,
    ZeroWealthEndpoint,
)
from .processes import IIDProcess, Path, Process, path_from_spec, process_from_spec
from .seeding import substream
from .taxonomy import Granularity, circulating_supply


class Mode(str, Enum):
    STATIC_DETERMINISTIC = "static_deterministic"
    STATIC_PROBABILISTIC = "static_probabilistic"
    DYNAMIC_DETERMINISTIC = "dynamic_deterministic"
    DYNAMIC_PROBABILISTIC = "dynamic_probabilistic"

    @property
    def static(self):
        return self in (Mode.STATIC_DETERMINISTIC, Mode.STATIC_PROBABILISTIC)


class DynamicKind(str, Enum):
    PROACTIVE = "proactive"
    REACTIVE = "reactive"


# --- distributions -----------------------------------------------------------


@dataclass(frozen=True)
class BernoulliDemand:
    """``size`` units with probability ``p``, otherwise none."""

    p: float
    size: float = 1

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError("demand.p", "probability outside [0, 1]")

    @property
    def integer_valued(self):
        return float(self.size).is_integer()

    def mean(self):
        return self.p * self.size

    def sample(self, rng):
        hit = rng.random() < self.p
        return int(self.size) if hit and self.integer_valued else (self.size if hit else 0)


@dataclass(frozen=True)
class BinomialDemand:
    trials: int
    p: float
    integer_valued = True

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0 or self.trials < 0 or int(self.trials) != self.trials:
            raise ValidationError("demand", "binomial needs integer trials >= 0 and p in [0, 1]")

    def mean(self):
        return self.trials * self.p

    def sample(self, rng):
        return int(rng.binomial(int(self.trials), self.p))


@dataclass(frozen=True)
class ScipyDistribution:
    """Any distribution from :mod:`scipy.stats`, by name and keyword parameters."""

    name: str
    params: tuple = ()

    def __post_init__(self):
        if isinstance(self.params, dict):
            object.__setattr__(self, "params", tuple(sorted(self.params.items())))
        if not hasattr(stats, self.name):
            raise ValidationError("demand.name", f"unknown distribution {self.name!r}")

    @property
    def frozen(self):
        return getattr(stats, self.name)(**dict(self.params))

    @property
    def integer_valued(self):
        return isinstance(getattr(stats, self.name), stats.rv_discrete)

    def mean(self):
        m = float(self.frozen.mean())
        if not math.isfinite(m):
            raise UnboundedExpectation(f"{self.name} with {dict(self.params)} has no finite mean")
        return m

    def sample(self, rng):
        x = self.frozen.rvs(random_state=rng)
        return int(x) if self.integer_valued else float(x)


def distribution_from_spec(spec):
    kind = spec.get("type", spec.get("name"))
    if kind == "bernoulli":
        return BernoulliDemand(spec["p"], spec.get("size", 1))
    if kind == "binomial":
        return BinomialDemand(spec["trials"], spec["p"])
    if kind == "distribution":
        return ScipyDistribution(spec["name"], spec.get("params", {}))
    return ScipyDistribution(spec["name"], spec.get("params", {}))


# --- value sources -----------------------------------------------------------


class Source:
    """Where a demand, price or rotation value comes from at each step."""

    deterministic = True
    static = True
    integer_valued = False

    def expected(self, k=0, dt=1.0):
        raise NotImplementedError

    def bind(self, rng):
        """Per-run sampler exposing ``value(k, dt)``."""
        return self


@dataclass(frozen=True)
class ConstantSource(Source):
    level: float

    @property
    def integer_valued(self):
        return float(self.level).is_integer()

    def expected(self, k=0, dt=1.0):
        return float(self.level)

    def value(self, k, dt=1.0):
        return self.level


@dataclass(frozen=True)
class PathSource(Source):
    path: Path
    static = False

    def expected(self, k=0, dt=1.0):
        return self.path.value(k, dt)

    def value(self, k, dt=1.0):
        return self.path.value(k, dt)


@dataclass(frozen=True)
class DistributionSource(Source):
    """A fixed distribution: static in expectation, random when sampled."""

    distribution: object
    deterministic = False

    @property
    def integer_valued(self):
        return self.distribution.integer_valued

    def expected(self, k=0, dt=1.0):
        return self.distribution.mean()

    def bind(self, rng):
        return IIDProcess(self.distribution).start(rng)


@dataclass(frozen=True)
class ProcessSource(Source):
    process: Process
    deterministic = False
    static = False

    @property
    def integer_valued(self):
        return self.process.integer_valued

    def expected(self, k=0, dt=1.0):
        return self.process.expected(k, dt)

    def bind(self, rng):
        return self.process.start(rng)


def source_from_spec(spec):
    kind = spec["type"]
    if kind == "constant":
        return ConstantSource(spec["value"])
    if kind == "path":
        return PathSource(path_from_spec(spec["path"]))
    if kind in ("bernoulli", "binomial", "distribution"):
        return DistributionSource(distribution_from_spec(spec))
    if kind == "process":
        return ProcessSource(process_from_spec(spec["process"], distribution_from_spec))
    raise ValidationError("rates", f"unknown source type {kind!r}")


# --- matrix builders ---------------------------------------------------------


def _pair_sign(taxonomy, interaction):
    lo, hi = taxonomy.interaction_pair(interaction.id)
    return 1.0 if taxonomy.index(interaction.payee) == lo else -1.0


def antisymmetric(upper, n):
    """Mirror ``{(a, b): value}`` with ``a < b`` into an antisymmetric matrix."""
    B = np.zeros((n, n))
    for (a, b), v in upper.items():
        if a > b:
            a, b, v = b, a, -v
        B[a, b] = v
        B[b, a] = -v
    return B


def beta_static_deterministic(pair_flows, F, M, dt):
    """Interaction rates from net payments per category pair.

    ``pair_flows`` maps declared pairs ``(a, b)`` to the summed ``iota``
    (positive = into the lower-indexed category). Every declared pair needs
    both endpoints to hold wealth.
    """
    F = np.asarray(F, dtype=float)
    if not M > 0 or not dt > 0:
        raise ValueError("M and dt must be positive")
    upper = {}
    for (a, b), flow in pair_flows.items():
        if a > b:
            a, b, flow = b, a, -flow
        denom = F[a] * F[b]
        if denom == 0:
            raise ZeroWealthEndpoint(f"categories {a} and {b} interact but one holds no wealth")
        upper[(a, b)] = upper.get((a, b), 0.0) + (M / dt) * flow / denom
    return antisymmetric(upper, len(F))


def active_pairs(taxonomy, demand):
    """Category pairs joined by at least one interaction that has a demand model."""
    return {taxonomy.interaction_pair(it.id) for it in taxonomy.interactions if it.id in demand}


def expected_flows(taxonomy, demand, price):
    """Signed ``E[demand] * price`` summed per active pair."""
    flows = {pair: 0.0 for pair in active_pairs(taxonomy, demand)}
    for it in taxonomy.interactions:
        d = demand.get(it.id)
        if d is None:
            continue
        p = price[it.id]
        e = d.expected()
        if not math.isfinite(e):
            raise UnboundedExpectation(f"demand for {it.id!r} has no finite mean")
        flows[taxonomy.interaction_pair(it.id)] += _pair_sign(taxonomy, it) * e * p.expected()
    return flows


def beta_static_probabilistic(taxonomy, demand, price, F, M, dt):
    """Interaction rates with each demand replaced by its expectation.

    For Bernoulli demand the expectation is ``p * size``; for binomial it is
    ``trials * p``. Prices must be constant.
    """
    for it in taxonomy.interactions:
        p = price.get(it.id)
        if it.id in demand and not isinstance(p, ConstantSource):
            raise ValidationError(f"rates.price.{it.id}", "static modes need constant prices")
    return beta_static_deterministic(expected_flows(taxonomy, demand, price), F, M, dt)


def gamma_static(mu):
    """Rotation matrix from gross rotation rates ``mu[a, b]`` (a -> b)."""
    mu = np.array(mu, dtype=float)
    n = mu.shape[0]
    off = ~np.eye(n, dtype=bool)
    if np.any(mu[off] < 0):
        raise NegativeRotationRate("rotation rates must be nonnegative")
    G = np.where(off, mu, 0.0).T.copy()
    G[np.diag_indices(n)] = -G.sum(axis=0)
    return G


# --- rotation specs ----------------------------------------------------------


@dataclass(frozen=True)
class RotationSpec:
    """Per-channel sources keyed by ``(source_index, target_index)``."""

    channels: tuple = ()

    @property
    def static(self):
        return all(src.static for _, src in self.channels)

    @property
    def deterministic(self):
        return all(src.deterministic for _, src in self.channels)


# --- reactive rules ----------------------------------------------------------


@dataclass(frozen=True)
class ReactiveRule:
    """Multiplier on one demand, price or rotation value, driven by a statistic of the state.

    ``statistic`` is ``"circulating_fraction"`` (circulating supply over ``M``),
    ``"share:<category>"`` (that category's wealth over ``M``) or
    ``"supply_ratio"`` (``M`` over its initial value). ``form`` is
    ``"affine"`` with ``intercept``/``slope``, or ``"table"`` with ``xs``/``ys``
    interpolated linearly and held flat outside the table.
    """

    target: str
    statistic: str
    form: str = "affine"
    intercept: float = 1.0
    slope: float = 0.0
    xs: tuple = ()
    ys: tuple = ()

    def multiplier(self, x):
        if self.form == "affine":
            return self.intercept + self.slope * x
        return float(np.interp(x, self.xs, self.ys))


def _statistic(name, taxonomy, F, M, M0):
    if name == "circulating_fraction":
        return circulating_supply(F, taxonomy, M) / M
    if name == "supply_ratio":
        return M / M0
    if name.startswith("share:"):
        return F[taxonomy.index(name.split(":", 1)[1])] / M
    raise ValidationError("rates.reactive_rules.statistic", f"unknown statistic {name!r}")


# --- schedule ----------------------------------------------------------------


@dataclass(frozen=True)
class RateSchedule:
    taxonomy: object
    mode: Mode
    demand: dict = field(default_factory=dict)
    price: dict = field(default_factory=dict)
    rotation: RotationSpec = RotationSpec()
    dynamic_kind: DynamicKind = DynamicKind.PROACTIVE
    beta: dict = field(default_factory=dict)
    rules: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "dynamic_kind", DynamicKind(self.dynamic_kind))
        self.validate()

    @property
    def reactive(self):
        return not self.mode.static and self.dynamic_kind is DynamicKind.REACTIVE

    def validate(self):
        tax = self.taxonomy
        ids = {it.id for it in tax.interactions}
        for name, table in (("demand", self.demand), ("price", self.price)):
            for key in table:
                if key not in ids:
                    raise ValidationError(f"rates.{name}.{key}", "DanglingEndpoint")
        for it in tax.interactions:
            d = self.demand.get(it.id)
            if d is None:
                continue
            if it.id not in self.price:
                raise ValidationError(f"rates.price.{it.id}", "missing price")
            if it.granularity is Granularity.INTEGER and isinstance(d, (ConstantSource, DistributionSource, ProcessSource)):
                if not d.integer_valued:
                    raise ValidationError(f"rates.demand.{it.id}", "InfeasibleSample",
                                          "integer-granularity demand needs an integer-valued model")
        declared = {(tax.index(r.source), tax.index(r.target)) for r in tax.rotations}
        for (a, b), _ in self.rotation.channels:
            if (a, b) not in declared:
                raise ValidationError("rates.rotation", "DanglingEndpoint", f"channel {a}->{b} not declared")
        if self.beta and self.mode is not Mode.STATIC_DETERMINISTIC:
            raise ValidationError("rates.beta", "explicit interaction rates are static deterministic only")
        sources = list(self.demand.values()) + list(self.price.values()) + [s for _, s in self.rotation.channels]
        m = self.mode
        if m is Mode.STATIC_DETERMINISTIC:
            if not all(isinstance(s, ConstantSource) for s in sources):
                raise ValidationError("rates.mode", "static_deterministic needs constant demand, price and rotation")
        elif m is Mode.STATIC_PROBABILISTIC:
            for s in sources:
                if not isinstance(s, (ConstantSource, DistributionSource)):
                    raise ValidationError("rates.mode", "static_probabilistic needs constant or distribution sources")
            for key, d in self.demand.items():
                d.expected()
        elif m is Mode.DYNAMIC_DETERMINISTIC:
            if not all(s.deterministic for s in sources):
                raise ValidationError("rates.mode", "dynamic_deterministic sources must be deterministic")
        if self.rules and not self.reactive:
            raise ValidationError("rates.reactive_rules", "rules need a reactive dynamic schedule")
        for rule in self.rules:
            kind, _, ref = rule.target.partition(":")
            if kind in ("demand", "price"):
                if ref not in ids:
                    raise ValidationError("rates.reactive_rules.target", f"unknown interaction {ref!r}")
                it = tax.interaction(ref)
                if kind == "demand" and it.granularity is Granularity.INTEGER:
                    raise ValidationError("rates.reactive_rules.target", "InfeasibleSample",
                                          "cannot rescale integer-granularity demand")
            elif kind == "rotation":
                src, _, dst = ref.partition("->")
                if (tax.index(src), tax.index(dst)) not in declared:
                    raise ValidationError("rates.reactive_rules.target", f"undeclared channel {ref!r}")
            else:
                raise ValidationError("rates.reactive_rules.target", f"bad target {rule.target!r}")
            if rule.form not in ("affine", "table"):
                raise ValidationError("rates.reactive_rules.form", f"unknown form {rule.form!r}")

    def start(self, F0, M0, dt=1.0, seed=0):
        return RateRun(self, F0, M0, dt, seed)


class RateRun:
    """Per-run rate state: the static matrices, or the bound samplers of a dynamic schedule."""

    def __init__(self, schedule, F0, M0, dt=1.0, seed=0):
        self.schedule = schedule
        self.dt = float(dt)
        self.M0 = float(M0)
        tax = schedule.taxonomy
        self.n = tax.n
        self._bound = {}
        for key, src in schedule.demand.items():
            self._bound[("demand", key)] = src.bind(substream(seed, f"demand:{key}"))
        for key, src in schedule.price.items():
            self._bound[("price", key)] = src.bind(substream(seed, f"price:{key}"))
        for (a, b), src in schedule.rotation.channels:
            self._bound[("rotation", (a, b))] = src.bind(substream(seed, f"rotation:{tax.ids[a]}->{tax.ids[b]}"))
        self._static = None
        if schedule.mode.static:
            self._static = self._static_pair(np.asarray(F0, dtype=float), M0)

    def _static_pair(self, F, M):
        s = self.schedule
        tax = s.taxonomy
        if s.mode is Mode.STATIC_DETERMINISTIC:
            B = beta_static_deterministic(expected_flows(tax, s.demand, s.price), F, M, self.dt)
            if s.beta:
                B = B + antisymmetric(s.beta, tax.n)
        else:
            B = beta_static_probabilistic(tax, s.demand, s.price, F, M, self.dt)
        mu = np.zeros((tax.n, tax.n))
        for (a, b), src in s.rotation.channels:
            mu[a, b] = src.expected()
        return B, gamma_static(mu)

    def _multiplier(self, target, F, M):
        m = 1.0
        for rule in self.schedule.rules:
            if rule.target == target:
                m *= rule.multiplier(_statistic(rule.statistic, self.schedule.taxonomy, F, M, self.M0))
        return m

    def flows(self, k, F=None, M=None):
        """Realized signed payment per interaction at step ``k``."""
        s = self.schedule
        tax = s.taxonomy
        out = {}
        for it in tax.interactions:
            if it.id not in s.demand:
                continue
            d = self._bound[("demand", it.id)].value(k, self.dt)
            p = self._bound[("price", it.id)].value(k, self.dt)
            if s.reactive:
                d *= self._multiplier(f"demand:{it.id}", F, M)
                p *= self._multiplier(f"price:{it.id}", F, M)
            if d < 0 or not math.isfinite(d):
                raise InfeasibleSample(f"demand {d!r} for {it.id!r} at step {k}")
            if it.granularity is Granularity.INTEGER and not float(d).is_integer():
                raise InfeasibleSample(f"non-integer demand {d!r} for integer interaction {it.id!r} at step {k}")
            if p < 0 or not math.isfinite(p):
                raise InfeasibleSample(f"price {p!r} for {it.id!r} at step {k}")
            out[it.id] = _pair_sign(tax, it) * d * p
        return out

    def rates(self, k, F, M):
        if self._static is not None:
            return self._static
        s = self.schedule
        tax = s.taxonomy
        F = np.asarray(F, dtype=float)
        pair_flows = {pair: 0.0 for pair in active_pairs(tax, s.demand)}
        for iid, iota in self.flows(k, F, M).items():
            pair_flows[tax.interaction_pair(iid)] += iota
        B = beta_static_deterministic(pair_flows, F, M, self.dt)
        mu = np.zeros((self.n, self.n))
        for (a, b), _ in s.rotation.channels:
            g = self._bound[("rotation", (a, b))].value(k, self.dt)
            if s.reactive:
                g *= self._multiplier(f"rotation:{tax.ids[a]}->{tax.ids[b]}", F, M)
            mu[a, b] = g
        return B, gamma_static(mu)


def materialize_rates(run, k, F, M):
    """``(B, Gamma)`` for the step ``k -> k+1`` of one run."""
    return run.rates(k, F, M)


def check_rate_invariants(B, G, atol=1e-12):
    B = np.asarray(B)
    G = np.asarray(G)
    n = B.shape[0]
    off = ~np.eye(n, dtype=bool)
    return bool(
        np.array_equal(B, -B.T)
        and np.all(np.abs(G.sum(axis=0)) <= atol)
        and np.all(G[off] >= 0)
    )
