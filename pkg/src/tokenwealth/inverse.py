"""Recover constant rate matrices whose equilibrium is a prescribed wealth vector.

At a fixed point the macro right-hand side vanishes. For a fixed target ``F``
the defect is linear in every interaction and rotation rate:

* ``beta[a, b]`` (stored antisymmetrically) contributes ``(F_a F_b / M)(e_a - e_b)``;
* a rotation rate from ``a`` to ``b`` contributes ``F_a (e_b - e_a)``.

Free rates are found by regularized least squares with nonnegative rotation
rates, using an active-set sweep. Fixed rates keep their given values.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleStructure, MaxIterations, NegativeWealth, ValidationError
from .macro import MacroState, equilibrium_defect, step
from .parametrization import gamma_static
from .seeding import substream


@dataclass
class InverseProblem:
    """Target equilibrium plus which rates may move.

    ``free_beta`` lists category index pairs ``(a, b)``; ``free_gamma`` lists
    rotation channels ``(source, target)``. ``fixed_B`` and ``fixed_Gamma``
    hold the rates that stay put (zero when omitted); their entries at free
    positions are ignored. ``regularization`` defaults to ``1e-6 * M``.
    """

    taxonomy: object
    target: np.ndarray
    M: float
    free_beta: list = field(default_factory=list)
    free_gamma: list = field(default_factory=list)
    fixed_B: np.ndarray = None
    fixed_Gamma: np.ndarray = None
    regularization: float = None

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float)
        n = len(self.target)
        if self.taxonomy is not None and self.taxonomy.n != n:
            raise ValidationError("inverse.target", f"{n} entries for {self.taxonomy.n} categories")
        if abs(self.target.sum() - self.M) > 1e-9 * self.M:
            raise ValidationError("inverse.target", "conservation", f"target sums to {self.target.sum()!r}, M={self.M!r}")
        if np.any(self.target < 0):
            raise ValidationError("inverse.target", "target wealth must be nonnegative")
        self.free_beta = [tuple(sorted(map(int, p))) for p in self.free_beta]
        self.free_gamma = [tuple(map(int, p)) for p in self.free_gamma]
        for a, b in self.free_beta + self.free_gamma:
            if a == b or not (0 <= a < n and 0 <= b < n):
                raise ValidationError("inverse.free", f"bad index pair ({a}, {b})")
            if self.target[a] <= 0 or self.target[b] <= 0:
                raise ValidationError("inverse.target", f"categories {a} and {b} have free rates but zero target wealth")
        if len(set(self.free_beta)) != len(self.free_beta) or len(set(self.free_gamma)) != len(self.free_gamma):
            raise ValidationError("inverse.free", "a free rate is listed twice")
        self.fixed_B = np.zeros((n, n)) if self.fixed_B is None else np.array(self.fixed_B, dtype=float)
        if self.fixed_Gamma is None:
            self.fixed_Gamma = np.zeros((n, n))
        else:
            self.fixed_Gamma = np.array(self.fixed_Gamma, dtype=float)
        if self.regularization is None:
            self.regularization = 1e-6 * self.M
        if self.regularization < 0:
            raise ValidationError("inverse.regularization", "must be nonnegative")

    @property
    def n(self):
        return len(self.target)

    @property
    def n_free(self):
        return len(self.free_beta) + len(self.free_gamma)

    def base_rates(self):
        """Fixed rates with the free positions zeroed, as valid matrices."""
        B = self.fixed_B.copy()
        for a, b in self.free_beta:
            B[a, b] = B[b, a] = 0.0
        mu = self.fixed_Gamma.T.copy()  # mu[a, b]: rate from a to b
        np.fill_diagonal(mu, 0.0)
        for a, b in self.free_gamma:
            mu[a, b] = 0.0
        return B, gamma_static(mu)

    def design(self):
        """Columns of the defect's dependence on each free rate, betas first."""
        F, M = self.target, self.M
        cols = []
        for a, b in self.free_beta:
            c = np.zeros(self.n)
            c[a] = F[a] * F[b] / M
            c[b] = -c[a]
            cols.append(c)
        for a, b in self.free_gamma:
            c = np.zeros(self.n)
            c[b] = F[a]
            c[a] = -F[a]
            cols.append(c)
        return np.array(cols).T.reshape(self.n, len(cols))

    def assemble(self, theta):
        B, G = self.base_rates()
        nb = len(self.free_beta)
        for (a, b), v in zip(self.free_beta, theta[:nb]):
            B[a, b] = v
            B[b, a] = -v
        for (a, b), v in zip(self.free_gamma, theta[nb:]):
            G[b, a] = v
            G[a, a] -= v
        return B, G


@dataclass
class InverseSolution:
    B: np.ndarray
    Gamma: np.ndarray
    residual_norm: float
    converged: bool
    parameters: np.ndarray
    iterations: int = 0

    def to_dict(self):
        return {
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "iterations": self.iterations,
            "parameters": self.parameters.tolist(),
        }


def _lstsq(C, d, cols):
    s = np.zeros(C.shape[1])
    if cols:
        s[cols] = np.linalg.lstsq(C[:, cols], d, rcond=None)[0]
    return s


def bounded_least_squares(A, rhs, n_free_sign, weight=0.0, max_iter=None, tol=None):
    """Minimize ``|A x - rhs|^2 + weight^2 |x|^2`` with ``x[:n_free_sign]``
    unrestricted and the rest nonnegative.

    Active-set method in the style of Lawson and Hanson. Subproblems are solved
    on the stacked system ``[A; weight I]`` with an orthogonal least-squares
    solver rather than normal equations. Returns ``(x, iterations)``.
    """
    m, p = A.shape
    C = np.vstack([A, weight * np.eye(p)]) if weight > 0 else A
    d = np.concatenate([rhs, np.zeros(p)]) if weight > 0 else rhs
    max_iter = 3 * p + 10 if max_iter is None else max_iter
    if tol is None:
        tol = 1e-12 * max(1.0, np.abs(C).max(initial=0.0)) * max(1.0, np.abs(d).max(initial=0.0))
    passive = list(range(n_free_sign))
    x = _lstsq(C, d, passive)
    it = 0
    while True:
        grad = C.T @ (d - C @ x)
        cand = [j for j in range(n_free_sign, p) if j not in passive and grad[j] > tol]
        if not cand:
            return x, it
        it += 1
        if it > max_iter:
            raise MaxIterations(f"active-set sweep exceeded {max_iter} iterations")
        passive.append(max(cand, key=lambda j: grad[j]))
        while True:
            s = _lstsq(C, d, sorted(passive))
            bad = [j for j in passive if j >= n_free_sign and s[j] <= 0]
            if not bad:
                x = s
                break
            it += 1
            if it > max_iter:
                raise MaxIterations(f"active-set sweep exceeded {max_iter} iterations")
            alpha = min(x[j] / (x[j] - s[j]) for j in bad)
            x = x + alpha * (s - x)
            passive = [j for j in passive if j < n_free_sign or x[j] > tol]
            for j in range(n_free_sign, p):
                if j not in passive:
                    x[j] = 0.0


def solve_equilibrium_rates(problem):
    """Free rates that make ``problem.target`` a fixed point of the macro system.

    Raises :class:`InfeasibleStructure` when even unrestricted free rates
    cannot cancel the defect of the fixed rates. ``converged`` reports whether
    the final defect norm is below ``1e-8 * M``.
    """
    M = problem.M
    B0, G0 = problem.base_rates()
    d0 = equilibrium_defect(problem.target, B0, G0, M)
    A = problem.design()
    limit = 1e-8 * M
    if problem.n_free:
        x_free = np.linalg.lstsq(A, -d0, rcond=None)[0]
        floor = np.linalg.norm(A @ x_free + d0)
    else:
        floor = np.linalg.norm(d0)
    if floor >= limit:
        raise InfeasibleStructure(f"free rates leave a defect of {floor:.3g} (limit {limit:.3g})")
    if problem.n_free:
        theta, it = bounded_least_squares(A, -d0, len(problem.free_beta), problem.regularization)
    else:
        theta, it = np.zeros(0), 0
    B, G = problem.assemble(theta)
    res = float(np.linalg.norm(equilibrium_defect(problem.target, B, G, M)))
    return InverseSolution(B, G, res, bool(res < limit), theta, it)


@dataclass
class VerificationReport:
    initial_distance: float
    final_distance: float
    distances: np.ndarray
    classification: str
    monotone_after_transient: bool
    stationary: bool
    diverged_at: int = None

    @property
    def shrank(self):
        return self.final_distance < self.initial_distance

    def to_dict(self):
        return {
            "initial_distance": self.initial_distance,
            "final_distance": self.final_distance,
            "classification": self.classification,
            "monotone_after_transient": self.monotone_after_transient,
            "stationary": self.stationary,
            "shrank": self.shrank,
            "diverged_at": self.diverged_at,
        }


def perturb(target, amount, rng):
    """Relative perturbation of each entry by ``+-amount``, rescaled to the same total.

    Signs are balanced (half up, half down in random order) so the rescaling
    never cancels the perturbation.
    """
    F = np.asarray(target, dtype=float)
    signs = rng.permutation(np.where(np.arange(F.size) % 2 == 0, 1.0, -1.0))
    G = F * (1.0 + amount * signs)
    return G * (F.sum() / G.sum())


def verify_solution(solution, problem, perturbation=0.05, horizon=5000, dt=1.0, seed=0, transient=0.1):
    """Forward-simulate from a perturbed target and track the relative L1 distance to it.

    Stationarity (``solution.converged``) and attraction are reported
    separately. The run is ``attracting`` if the distance falls by more than
    1%, ``repelling`` if it grows by more than 1% or the run leaves the
    nonnegative orthant, and ``neutral`` otherwise.
    """
    F_star = problem.target
    M = problem.M
    F0 = perturb(F_star, perturbation, substream(seed, "perturbation"))
    state = MacroState(F0.copy(), 0, M)
    dist = [float(np.abs(F0 - F_star).sum() / M)]
    diverged = None
    for k in range(horizon):
        try:
            state = step(state, solution.B, solution.Gamma, dt=dt)
        except NegativeWealth:
            diverged = k
            break
        dist.append(float(np.abs(state.F - F_star).sum() / M))
    dist = np.array(dist)
    first, last = dist[0], dist[-1]
    if diverged is not None or last > 1.01 * first:
        kind = "repelling"
    elif last < 0.99 * first:
        kind = "attracting"
    else:
        kind = "neutral"
    tail = dist[int(transient * len(dist)):]
    monotone = bool(np.all(np.diff(tail) <= 1e-15))
    return VerificationReport(first, last, dist, kind, monotone, solution.converged, diverged)


def random_rates(n, rng, beta_range=0.2, gamma_range=(0.02, 0.1)):
    """Random antisymmetric ``B`` and fully connected rotation matrix ``Gamma``."""
    B = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    B[iu] = rng.uniform(-beta_range, beta_range, size=len(iu[0]))
    B = B - B.T
    mu = rng.uniform(*gamma_range, size=(n, n))
    np.fill_diagonal(mu, 0.0)
    return B, gamma_static(mu)


def relax(F0, B, Gamma, M, dt=1.0, max_steps=200_000, tol=1e-13):
    """Forward-simulate until a step moves the state by less than ``tol * M`` (L1)."""
    state = MacroState(np.asarray(F0, dtype=float).copy(), 0, M)
    for _ in range(max_steps):
        new = step(state, B, Gamma, dt=dt)
        if np.abs(new.F - state.F).sum() < tol * M:
            return new.F
        state = new
    raise ValueError("forward simulation did not settle")
