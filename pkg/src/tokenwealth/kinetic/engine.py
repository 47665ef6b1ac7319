"""Agent-level Monte Carlo runs and the bridge to the macro system."""
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError, ZeroWealthEndpoint
from ..seeding import substream
from ..taxonomy import AgentCategory, CategoryKind, build_taxonomy
from . import backend as _backend
from .rules import KineticModel, Variant

CHUNK = 1 << 16
DRIVEN_OUT = 1e-12


@dataclass(frozen=True)
class KineticAgent:
    id: int
    wealth: float
    saving_propensity: float = None


@dataclass(frozen=True)
class TransactionDraw:
    """One trade: agent ``pair[0]`` receives the ``eps`` share, ``pair[1]`` the rest."""

    pair: tuple
    eps: float

    def __post_init__(self):
        if self.pair[0] == self.pair[1]:
            raise ValueError("a transaction needs two distinct agents")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")

    @property
    def eps_bar(self):
        return 1.0 - self.eps


@dataclass
class KineticRun:
    snapshots: np.ndarray  # (n_snapshots, n)
    snapshot_steps: np.ndarray
    lambdas: np.ndarray
    model: KineticModel
    seed: int
    backend: str = "python"
    meta: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.snapshots[-1]

    def agents(self, snapshot=-1):
        lam = self.lambdas if self.model.variant is Variant.INDIVIDUAL_SAVING else [None] * len(self.lambdas)
        return [KineticAgent(i, float(w), None if l is None else float(l))
                for i, (w, l) in enumerate(zip(self.snapshots[snapshot], lam))]


def draw_pairs(rng, n, size):
    """Uniform ordered pairs of distinct agents plus uniform shares."""
    j = rng.integers(0, n, size=size, dtype=np.int64)
    k = rng.integers(0, n - 1, size=size, dtype=np.int64)
    k += k >= j
    eps = rng.random(size)
    return j, k, eps


def propensities(model, n, seed):
    if model.variant is Variant.GLOBAL_SAVING:
        return np.full(n, float(model.lam))
    if model.variant is Variant.INDIVIDUAL_SAVING:
        if model.lambdas:
            if len(model.lambdas) != n:
                raise ValidationError("kinetic.lambdas", f"{len(model.lambdas)} propensities for {n} agents")
            return np.array(model.lambdas, dtype=float)
        rng = substream(seed, "lambdas")
        lam = rng.random(n)
        while np.any(lam == 0.0):  # keep the open interval
            lam[lam == 0.0] = rng.random(int(np.sum(lam == 0.0)))
        return lam
    return np.zeros(n)


def run_kinetic(n, M, model, steps, snapshot_every=None, seed=0, initial=None, draws=None, backend=None):
    """Simulate ``steps`` random pairwise trades among ``n`` agents holding ``M`` in total.

    Snapshots are taken at step 0, every ``snapshot_every`` steps, and at the
    end. Agents start at ``M / n`` unless ``initial`` is given. ``draws`` may
    hold explicit ``(j, k, eps)`` arrays of length ``steps``, bypassing the
    generator. Draws come in fixed-size chunks, so the trajectory does not
    depend on the snapshot cadence.
    """
    if not isinstance(model, KineticModel):
        model = KineticModel(model)
    if n < 2:
        raise ValidationError("kinetic.agents", "at least two agents are required")
    if not M > 0:
        raise ValidationError("kinetic.total_wealth", "total wealth must be positive")
    if steps < 1:
        raise ValidationError("kinetic.steps", "at least one step is required")
    snapshot_every = steps if not snapshot_every else int(snapshot_every)

    if initial is None:
        wealth = np.full(n, M / n)
    else:
        wealth = np.array(initial, dtype=float)
        if wealth.shape != (n,) or np.any(wealth < 0):
            raise ValidationError("kinetic.initial_wealth", f"need {n} nonnegative wealths")
    lam = propensities(model, n, seed)
    kernel = _backend.get_kernel(backend)
    code = int(model.variant)

    if draws is not None:
        js, ks, eps = (np.ascontiguousarray(a) for a in draws)
        js = js.astype(np.int64)
        ks = ks.astype(np.int64)
        eps = eps.astype(float)
        if not len(js) == len(ks) == len(eps) == steps:
            raise ValueError("injected draws must have one entry per step")
        if np.any(js == ks):
            raise ValueError("injected pairs must be distinct")
        rng = None
    else:
        rng = substream(seed, "pairs")

    marks = list(range(0, steps, snapshot_every)) + [steps]
    shots = [wealth.copy()]
    done = 0
    buf_start, buf_end = 0, 0
    for target in marks[1:]:
        while done < target:
            if done >= buf_end:
                if rng is None:
                    buf = (js, ks, eps)
                    buf_start, buf_end = 0, steps
                else:
                    size = min(CHUNK, steps - done)
                    buf = draw_pairs(rng, n, size)
                    buf_start, buf_end = done, done + size
            stop = min(target, buf_end)
            lo, hi = done - buf_start, stop - buf_start
            kernel(wealth, lam, code, buf[0][lo:hi], buf[1][lo:hi], buf[2][lo:hi])
            done = stop
        shots.append(wealth.copy())
    return KineticRun(np.array(shots), np.array(marks), lam, model, seed, backend or _backend.DEFAULT)


def driven_out_fraction(wealth, threshold=DRIVEN_OUT):
    """Fraction of agents below ``threshold``; row-wise for a snapshot matrix."""
    return np.mean(np.asarray(wealth, dtype=float) < threshold, axis=-1)


def max_share(wealth):
    w = np.asarray(wealth, dtype=float)
    return w.max(axis=-1) / w.sum(axis=-1)


def singleton_taxonomy(n):
    """``n`` one-agent categories plus an empty reserve category acting as Control Mechanism."""
    cats = [AgentCategory(f"agent{i}") for i in range(n)]
    cats.append(AgentCategory("reserve", "reserve", CategoryKind.CONTROL_MECHANISM))
    return build_taxonomy(cats)


def kinetic_to_macro(wealth, pair_flows, dt=1.0):
    """Macro inputs reproducing one round of kinetic trades.

    ``pair_flows`` maps ``(j, k)`` to the net wealth ``dF`` that agent ``j``
    gained from agent ``k``. Returns ``(taxonomy, F, B, M)`` where ``F`` has a
    trailing zero entry for the reserve category and ``B`` is the
    antisymmetric interaction matrix with ``beta[j, k] = (M / dt) dF / (F_j F_k)``.
    """
    F_agents = np.asarray(wealth, dtype=float)
    n = len(F_agents)
    M = float(F_agents.sum())
    B = np.zeros((n + 1, n + 1))
    for (j, k), dF in pair_flows.items():
        if j == k:
            raise ValueError("a pair flow needs two distinct agents")
        if dF == 0:
            continue
        if F_agents[j] <= 0 or F_agents[k] <= 0:
            raise ZeroWealthEndpoint(f"agents {j} and {k} trade {dF!r} but one holds no wealth")
        beta = (M / dt) * dF / (F_agents[j] * F_agents[k])
        B[j, k] += beta
        B[k, j] -= beta
    F = np.append(F_agents, 0.0)
    return singleton_taxonomy(n), F, B, M
