"""Scenario files: JSON parsing, schema and semantic validation, digests and patches.

A scenario is validated in two passes. The bundled JSON Schema catches
structural mistakes; the domain constructors (taxonomy, rate schedule, supply
law) then check the economics. Errors from either pass surface as
:class:`ValidationError` with a dotted field path.
"""
import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .errors import ScenarioSyntaxError, TokenWealthError, ValidationError
from .kinetic import KineticModel, Variant
from .parametrization import (
    ConstantSource,
    Mode,
    RateSchedule,
    ReactiveRule,
    RotationSpec,
    source_from_spec,
)
from .processes import path_from_spec, process_from_spec
from .supply import (
    CompoundIncrement,
    ConstantSupply,
    GeneralSupply,
    MintBurnAllocation,
    SimpleIncrement,
    StochasticIncrement,
    supply_at,
    validate_supply,
)
from .taxonomy import build_taxonomy

_SCHEMA = None


def schema():
    global _SCHEMA
    if _SCHEMA is None:
        _SCHEMA = json.loads(resources.files("tokenwealth").joinpath("scenario.schema.json").read_text("utf-8"))
    return _SCHEMA


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def digest(obj):
    """sha256 of the canonical JSON form; independent of whitespace and key order."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


@dataclass
class KineticSpec:
    model: KineticModel
    agents: int
    total_wealth: float
    steps: int
    snapshot_every: int
    initial_wealth: np.ndarray = None
    equilibrium_window: int = None
    equilibrium_tol: float = 0.02
    histogram_bins: int = 50


@dataclass
class InverseSpec:
    target: np.ndarray
    free_beta: list
    free_gamma: list
    regularization: float = None
    perturbation: float = 0.05
    horizon: int = 5000


@dataclass
class Scenario:
    raw: dict
    taxonomy: object = None
    initial_wealth: np.ndarray = None
    schedule: RateSchedule = None
    supply: object = None
    allocation: MintBurnAllocation = None
    horizon: int = 1
    dt: float = 1.0
    seed: int = 0
    ensemble_size: int = 1
    snapshot_every: int = 1
    kinetic: KineticSpec = None
    inverse: InverseSpec = None
    digest: str = field(default="")

    @property
    def has_macro(self):
        return self.taxonomy is not None


@dataclass
class RunManifest:
    command: str
    scenario_digest: str
    seed: int
    runs: list
    version: str
    files: list = field(default_factory=list)

    def to_dict(self):
        return {
            "command": self.command,
            "scenario_digest": self.scenario_digest,
            "seed": self.seed,
            "runs": self.runs,
            "version": self.version,
            "files": sorted(self.files, key=lambda f: f["path"]),
        }


def _wrap(field_path, fn, *args, **kwargs):
    """Call a domain constructor, re-raising its errors as validation errors at ``field_path``."""
    try:
        return fn(*args, **kwargs)
    except ValidationError:
        raise
    except (TokenWealthError, KeyError, TypeError, ValueError) as exc:
        reason = type(exc).__name__ if isinstance(exc, TokenWealthError) else "invalid"
        raise ValidationError(field_path, reason, str(exc)) from exc


def _vector(spec, ids, field_path):
    if isinstance(spec, dict):
        unknown = set(spec) - set(ids)
        if unknown:
            raise ValidationError(field_path, "DanglingEndpoint", f"unknown categories {sorted(unknown)}")
        return np.array([float(spec.get(i, 0.0)) for i in ids])
    if len(spec) != len(ids):
        raise ValidationError(field_path, "LengthMismatch", f"{len(spec)} entries for {len(ids)} categories")
    return np.array(spec, dtype=float)


def _source(spec):
    if isinstance(spec, (int, float)):
        return ConstantSource(float(spec))
    return source_from_spec(spec)


def _schedule(tax, spec):
    mode = spec.get("mode", "static_deterministic")
    demand = {k: _wrap(f"rates.demand.{k}", _source, v) for k, v in spec.get("demand", {}).items()}
    price = {k: _wrap(f"rates.price.{k}", _source, v) for k, v in spec.get("price", {}).items()}
    channels = []
    for i, r in enumerate(spec.get("rotation", [])):
        a = _wrap(f"rates.rotation[{i}].from", tax.index, r["from"])
        b = _wrap(f"rates.rotation[{i}].to", tax.index, r["to"])
        channels.append(((a, b), _wrap(f"rates.rotation[{i}].source", _source, r["source"])))
    beta = {}
    for i, entry in enumerate(spec.get("beta", [])):
        a, b = (_wrap(f"rates.beta[{i}].pair", tax.index, e) for e in entry["pair"])
        if a == b:
            raise ValidationError(f"rates.beta[{i}].pair", "self-interaction")
        v = float(entry["value"])
        key, v = ((a, b), v) if a < b else ((b, a), -v)
        beta[key] = beta.get(key, 0.0) + v
    rules = tuple(ReactiveRule(**r) for r in spec.get("reactive_rules", []))
    return _wrap("rates", RateSchedule, tax, Mode(mode), demand, price, RotationSpec(tuple(channels)),
                 spec.get("dynamic_kind", "proactive"), beta, rules)


def _supply(spec, horizon, dt):
    variant = spec["variant"]
    m0 = float(spec["M_initial"])
    if variant == "constant":
        model = ConstantSupply(m0)
    elif variant in ("simple", "compound"):
        if "r" not in spec:
            raise ValidationError("supply.r", "missing")
        model = (SimpleIncrement if variant == "simple" else CompoundIncrement)(m0, float(spec["r"]))
    elif variant == "stochastic":
        proc = _wrap("supply.process", process_from_spec, spec.get("process", {"kind": "gbm"}))
        model = StochasticIncrement(m0, proc)
    else:
        if "g" not in spec:
            raise ValidationError("supply.g", "missing")
        model = GeneralSupply(m0, _wrap("supply.g", path_from_spec, spec["g"]))
    try:
        validate_supply(model, horizon, dt)
    except ValidationError:
        raise
    except TokenWealthError as exc:
        where = "supply.r" if variant in ("simple", "compound") else "supply"
        raise ValidationError(where, type(exc).__name__, str(exc)) from exc
    return model


def _kinetic(spec, seed):
    name = spec["model"]
    lam = spec.get("lambda", 0.0)
    lambdas = spec.get("lambdas", ())
    model = _wrap("kinetic.model", KineticModel, Variant.parse(name), lam, lambdas)
    n = spec["agents"]
    if lambdas and len(lambdas) != n:
        raise ValidationError("kinetic.lambdas", "LengthMismatch", f"{len(lambdas)} propensities for {n} agents")
    total = float(spec.get("total_wealth", n))
    init = spec.get("initial_wealth")
    if init is not None:
        init = np.array(init, dtype=float)
        if len(init) != n:
            raise ValidationError("kinetic.initial_wealth", "LengthMismatch")
        if abs(init.sum() - total) > 1e-9 * total:
            raise ValidationError("kinetic.initial_wealth", "conservation", f"sums to {init.sum()!r}, total {total!r}")
    steps = spec["steps"]
    return KineticSpec(model, n, total, steps, spec.get("snapshot_every", steps), init,
                       spec.get("equilibrium_window"), spec.get("equilibrium_tol", 0.02),
                       spec.get("histogram_bins", 50))


def _inverse(spec, tax, M):
    target = _vector(spec["target"], tax.ids, "inverse.target")
    if abs(target.sum() - M) > 1e-9 * M:
        raise ValidationError("inverse.target", "conservation", f"sums to {target.sum()!r}, M={M!r}")
    free = spec.get("free", {})
    fb = [tuple(_wrap("inverse.free.beta", tax.index, e) for e in p) for p in free.get("beta", [])]
    declared = {(tax.index(r.source), tax.index(r.target)) for r in tax.rotations}
    fg = []
    for p in free.get("gamma", []):
        a, b = (_wrap("inverse.free.gamma", tax.index, e) for e in p)
        if (a, b) not in declared:
            raise ValidationError("inverse.free.gamma", "DanglingEndpoint", f"channel {p[0]}->{p[1]} not declared")
        fg.append((a, b))
    return InverseSpec(target, fb, fg, spec.get("regularization"), spec.get("perturbation", 0.05),
                       spec.get("horizon", 5000))


def load_json(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioSyntaxError(exc.lineno, exc.colno, exc.msg) from None


def _check_burns(supply, allocation, F0, horizon, dt):
    """Reject allocations whose burns exceed a category's initial wealth along the nominal path."""
    nominal = np.array([supply.nominal(k, dt) for k in range(horizon + 1)])
    lowest = F0 + (nominal.min() - supply.M_initial) * allocation.weights
    if np.any(lowest < -1e-9 * supply.M_initial):
        j = int(np.argmin(lowest))
        raise ValidationError("supply.allocation", "InsufficientWealthForBurn",
                              f"category {j} would be burned to {lowest[j]!r} with rates frozen")


def parse_scenario(text):
    """Parse and validate scenario text (a JSON string, bytes or an already-loaded dict)."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    raw = load_json(text) if isinstance(text, str) else copy.deepcopy(text)
    validator = jsonschema.Draft202012Validator(schema())
    err = jsonschema.exceptions.best_match(validator.iter_errors(raw))
    if err is not None:
        where = ".".join(str(p) for p in err.absolute_path) or "scenario"
        raise ValidationError(where, "schema", err.message)

    horizon = raw.get("horizon", 1)
    dt = float(raw.get("dt", 1.0))
    seed = int(raw.get("seed", 0))
    sc = Scenario(raw=raw, horizon=horizon, dt=dt, seed=seed, ensemble_size=raw.get("ensemble_size", 1),
                  snapshot_every=raw.get("snapshot_every", 1), digest=digest(raw))

    if "taxonomy" in raw:
        t = raw["taxonomy"]
        tax = build_taxonomy(t["categories"], t.get("interactions", ()), t.get("rotations", ()))
        sc.taxonomy = tax
        if "supply" not in raw:
            raise ValidationError("supply", "missing")
        if "initial_wealth" not in raw:
            raise ValidationError("initial_wealth", "missing")
        sc.supply = _supply(raw["supply"], horizon, dt)
        alloc = raw["supply"].get("allocation")
        if alloc is None:
            sc.allocation = MintBurnAllocation.to_control_mechanism(tax)
        else:
            sc.allocation = _wrap("supply.allocation", MintBurnAllocation, _vector(alloc, tax.ids, "supply.allocation"))
        F0 = _vector(raw["initial_wealth"], tax.ids, "initial_wealth")
        M0 = supply_at(sc.supply, 0, dt) if not isinstance(sc.supply, StochasticIncrement) else sc.supply.M_initial
        if abs(F0.sum() - M0) > 1e-9 * M0:
            raise ValidationError("initial_wealth", "conservation", f"sums to {F0.sum()!r}, supply is {M0!r}")
        sc.initial_wealth = F0
        _check_burns(sc.supply, sc.allocation, F0, horizon, dt)
        sc.schedule = _schedule(tax, raw.get("rates", {}))
        if sc.schedule.mode.static:
            # static rates divide by the initial wealth of every active pair
            _wrap("rates", sc.schedule.start, F0, M0, dt, seed)
        if "inverse" in raw:
            if not isinstance(sc.supply, ConstantSupply):
                raise ValidationError("inverse", "inverse problems need a constant supply")
            sc.inverse = _inverse(raw["inverse"], tax, sc.supply.M_initial)
    elif "inverse" in raw:
        raise ValidationError("taxonomy", "missing", "an inverse block needs a taxonomy")
    if "kinetic" in raw:
        sc.kinetic = _kinetic(raw["kinetic"], seed)
    if sc.taxonomy is None and sc.kinetic is None:
        raise ValidationError("scenario", "empty", "need a taxonomy or a kinetic block")
    return sc


def rates_block(taxonomy, B, Gamma, tol=0.0):
    """Static deterministic ``rates`` block reproducing the matrices ``B`` and ``Gamma``."""
    ids = taxonomy.ids
    n = len(ids)
    beta = [{"pair": [ids[a], ids[b]], "value": float(B[a, b])}
            for a in range(n) for b in range(a + 1, n) if abs(B[a, b]) > tol]
    rotation = [{"from": ids[a], "to": ids[b], "source": {"type": "constant", "value": float(Gamma[b, a])}}
                for a in range(n) for b in range(n) if a != b and Gamma[b, a] > tol]
    return {"mode": "static_deterministic", "beta": beta, "rotation": rotation}


def apply_patch(raw, patch):
    """Scenario dict with the patch's top-level blocks replacing the originals."""
    out = copy.deepcopy(raw)
    out.update(copy.deepcopy(patch))
    return out
