"""Discrete-time compartmental wealth dynamics.

One step of width ``dt`` is the forward difference

    F' = F + dt * [ (1/M(t)) F * (B @ F) + Gamma @ F ] + G(t + dt)

where ``*`` is the element-wise product and ``G`` distributes the supply change
``M(t + dt) - M(t)``. Antisymmetric ``B`` and zero-column-sum ``Gamma`` move
wealth without creating it, so the total follows the supply law exactly up to
rounding.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConservationViolation, InsufficientWealthForBurn, NegativeWealth
from .seeding import run_seed, substream
from .supply import MintBurnAllocation, realize

CONSERVATION_RTOL = 1e-9


@dataclass
class MacroState:
    F: np.ndarray
    t: int
    M: float

    def __post_init__(self):
        self.F = np.asarray(self.F, dtype=float)


@dataclass
class Trajectory:
    wealth: np.ndarray  # (steps + 1, n)
    supply: np.ndarray  # (steps + 1,)
    dt: float = 1.0
    categories: list = field(default_factory=list)
    seed: int = 0

    @property
    def steps(self):
        return np.arange(len(self.supply))

    @property
    def totals(self):
        return self.wealth.sum(axis=1)

    def state(self, k):
        return MacroState(self.wealth[k].copy(), k, float(self.supply[k]))

    def __len__(self):
        return len(self.supply)


def _rhs(F, B, Gamma, M):
    return F * (B @ F) / M + Gamma @ F


def step(state, B, Gamma, M_next=None, allocation=None, dt=1.0):
    """Advance ``state`` by one step.

    ``M_next`` is the supply at the next step (defaults to the current one);
    a change in supply is split by ``allocation`` (all of it to category 0 if
    no allocation is given and the supply moves, which callers should avoid).
    """
    F = state.F
    M = state.M
    M_next = M if M_next is None else float(M_next)
    F_mid = F + dt * _rhs(F, np.asarray(B, dtype=float), np.asarray(Gamma, dtype=float), M)
    if np.any(F_mid < 0):
        j = int(np.argmin(F_mid))
        raise NegativeWealth(state.t, j, float(F_mid[j]))
    if M_next != M:
        if allocation is None:
            raise ValueError("supply changes but no mint/burn allocation was given")
        G = allocation.split(M_next - M)
        F_new = F_mid + G
        if np.any(F_new < 0):
            j = int(np.argmin(F_new))
            raise InsufficientWealthForBurn(state.t, j, float(F_new[j]))
    else:
        F_new = F_mid
    err = abs(F_new.sum() - M_next)
    if err > CONSERVATION_RTOL * M_next:
        raise ConservationViolation(f"total {F_new.sum()!r} vs supply {M_next!r} after step {state.t}")
    return MacroState(F_new, state.t + 1, M_next)


def transaction_rule_reduce(F_prev, B, M, dt=1.0):
    """Pairwise form of a rotation-free, constant-supply step.

    Each agent (singleton category) ``j`` gains ``sum_k dF[j, k]`` with
    ``dF[j, k] = (dt/M) beta[j, k] F[j] F[k]``; evaluated pair by pair rather
    than through the matrix product, so it doubles as a check on :func:`step`.
    """
    F_prev = np.asarray(F_prev, dtype=float)
    B = np.asarray(B, dtype=float)
    n = len(F_prev)
    out = F_prev.copy()
    scale = dt / M
    for j in range(n):
        for k in range(j + 1, n):
            if B[j, k] == 0.0:
                continue
            dF = scale * B[j, k] * F_prev[j] * F_prev[k]
            out[j] += dF
            out[k] -= dF
    if np.any(out < 0):
        j = int(np.argmin(out))
        raise NegativeWealth(0, j, float(out[j]))
    return out


def simulate(scenario, seed=None, run_index=0):
    """Run the macro system over the scenario horizon.

    ``scenario`` needs ``taxonomy``, ``initial_wealth``, ``schedule``,
    ``supply``, ``allocation``, ``horizon``, ``dt`` and ``seed``. The run seed is
    ``seed ^ run_index``; the same inputs give a bit-identical trajectory.
    """
    master = scenario.seed if seed is None else seed
    rs = run_seed(master, run_index)
    dt = scenario.dt
    horizon = scenario.horizon
    path = realize(scenario.supply, horizon, dt, substream(rs, "supply"))
    allocation = scenario.allocation or MintBurnAllocation.to_control_mechanism(scenario.taxonomy)
    F0 = np.asarray(scenario.initial_wealth, dtype=float)
    rates = scenario.schedule.start(F0, path.at(0), dt, rs)

    wealth = np.empty((horizon + 1, len(F0)))
    wealth[0] = F0
    state = MacroState(F0.copy(), 0, path.at(0))
    for k in range(horizon):
        B, Gamma = rates.rates(k, state.F, state.M)
        state = step(state, B, Gamma, path.at(k + 1), allocation, dt)
        wealth[k + 1] = state.F
    return Trajectory(wealth, np.asarray(path.values, dtype=float), dt, scenario.taxonomy.ids, rs)


def integrate(F0, B, Gamma, M, steps, dt=1.0):
    """Constant-rate, constant-supply run; returns the ``(steps + 1, n)`` wealth matrix."""
    F = np.asarray(F0, dtype=float)
    out = np.empty((steps + 1, len(F)))
    out[0] = F
    state = MacroState(F.copy(), 0, float(M))
    for k in range(steps):
        state = step(state, B, Gamma, dt=dt)
        out[k + 1] = state.F
    return out


def equilibrium_defect(F, B, Gamma, M):
    """Right-hand side of the constant-supply system at ``F``; zero at a fixed point."""
    F = np.asarray(F, dtype=float)
    return _rhs(F, np.asarray(B, dtype=float), np.asarray(Gamma, dtype=float), M)
