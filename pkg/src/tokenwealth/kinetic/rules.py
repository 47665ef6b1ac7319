"""Pairwise exchange rules of the four kinetic wealth-exchange models.

Each rule produces candidate post-trade wealths for the two agents. The
candidates are then settled so the pair total is preserved exactly: the larger
share is kept and the smaller one is recomputed as ``total - larger``, a
subtraction that is exact in binary floating point because the larger share is
at least half the total.
"""
from dataclasses import dataclass
from enum import IntEnum

from ..errors import ValidationError


class Variant(IntEnum):
    NO_SAVING = 0
    MIN_INVESTMENT = 1
    GLOBAL_SAVING = 2
    INDIVIDUAL_SAVING = 3

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {
            "nosaving": "no_saving",
            "mininvestment": "min_investment",
            "globalsaving": "global_saving",
            "individualsaving": "individual_saving",
        }
        key = aliases.get(key, key)
        try:
            return cls[key.upper()]
        except KeyError:
            raise ValidationError("kinetic.model", f"unknown model {name!r}") from None


@dataclass(frozen=True)
class KineticModel:
    """Exchange rule plus its saving parameters.

    ``lam`` is the global saving propensity (GlobalSaving only). For
    IndividualSaving, ``lambdas`` fixes one propensity per agent; when it is
    empty each run draws them i.i.d. uniform on (0, 1).
    """

    variant: Variant
    lam: float = 0.0
    lambdas: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        if self.variant is Variant.GLOBAL_SAVING and not 0.0 < self.lam < 1.0:
            raise ValidationError("kinetic.lambda", "global saving propensity must lie in (0, 1)")
        if self.variant is Variant.INDIVIDUAL_SAVING and any(not 0.0 < x < 1.0 for x in self.lambdas):
            raise ValidationError("kinetic.lambdas", "individual saving propensities must lie in (0, 1)")


def settle(total, a, b):
    if a >= b:
        if a > total:
            a = total
        return a, total - a
    if b > total:
        b = total
    return total - b, b


def candidates(variant, xj, xk, lj, lk, eps):
    total = xj + xk
    if variant == 0:
        return total, eps * total, (1.0 - eps) * total
    if variant == 1:
        d = (2.0 * eps - 1.0) * (xj if xj < xk else xk)
        return total, xj + d, xk - d
    if variant == 2:
        share = (1.0 - lj) * total
        return total, lj * xj + eps * share, lj * xk + (1.0 - eps) * share
    pool = (1.0 - lj) * xj + (1.0 - lk) * xk
    return total, lj * xj + eps * pool, lk * xk + (1.0 - eps) * pool


def pair_step(model, xj, xk, eps, lam_j=None, lam_k=None):
    """Post-trade wealths ``(xj', xk')`` of one transaction.

    ``eps`` is the uniform draw; agent ``j`` receives the ``eps`` fraction.
    For GlobalSaving the propensities default to ``model.lam``.
    """
    if not isinstance(model, KineticModel):
        model = KineticModel(model)
    v = model.variant
    if xj < 0 or xk < 0:
        raise ValueError("wealth must be nonnegative")
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if v is Variant.GLOBAL_SAVING:
        lam_j = lam_k = model.lam if lam_j is None else lam_j
    elif v is Variant.INDIVIDUAL_SAVING:
        if lam_j is None or lam_k is None:
            raise ValueError("individual saving needs both propensities")
    else:
        lam_j = lam_k = 0.0
    total, a, b = candidates(int(v), float(xj), float(xk), float(lam_j), float(lam_k), float(eps))
    return settle(total, a, b)
