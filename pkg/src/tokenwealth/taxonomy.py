"""Agent categories, interaction types and rotation channels.

The declaration order of categories is the index order of every vector and
matrix elsewhere in the package.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DanglingEndpoint, DuplicateId, MissingControlMechanism, TaxonomyError


class CategoryKind(str, Enum):
    NORMAL = "Normal"
    CONTROL_MECHANISM = "ControlMechanism"
    TOKEN_DUMP = "TokenDump"


class Granularity(str, Enum):
    INTEGER = "Integer"
    CONTINUOUS = "Continuous"


@dataclass(frozen=True)
class AgentCategory:
    id: str
    name: str = ""
    kind: CategoryKind = CategoryKind.NORMAL

    def __post_init__(self):
        object.__setattr__(self, "kind", CategoryKind(self.kind))
        if not self.name:
            object.__setattr__(self, "name", self.id)


@dataclass(frozen=True)
class InteractionType:
    """A kind of exchange between two categories.

    ``payee`` is the endpoint that receives the payment ``demand * price``;
    it defaults to the first endpoint.
    """

    id: str
    endpoints: tuple
    granularity: Granularity = Granularity.CONTINUOUS
    payee: str = ""

    def __post_init__(self):
        object.__setattr__(self, "endpoints", tuple(self.endpoints))
        object.__setattr__(self, "granularity", Granularity(self.granularity))
        if not self.payee and self.endpoints:
            object.__setattr__(self, "payee", self.endpoints[0])

    @property
    def payer(self):
        a, b = self.endpoints
        return b if self.payee == a else a


@dataclass(frozen=True)
class RotationChannel:
    source: str
    target: str

    @property
    def label(self):
        return f"{self.source}->{self.target}"


@dataclass(frozen=True)
class TokenomicTaxonomy:
    categories: tuple
    interactions: tuple = ()
    rotations: tuple = ()
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {c.id: i for i, c in enumerate(self.categories)})

    @property
    def n(self):
        return len(self.categories)

    @property
    def ids(self):
        return [c.id for c in self.categories]

    def index(self, category_id):
        try:
            return self._index[category_id]
        except KeyError:
            raise DanglingEndpoint(f"unknown category {category_id!r}") from None

    @property
    def control_mechanism(self):
        return next(i for i, c in enumerate(self.categories) if c.kind is CategoryKind.CONTROL_MECHANISM)

    @property
    def token_dump(self):
        for i, c in enumerate(self.categories):
            if c.kind is CategoryKind.TOKEN_DUMP:
                return i
        return None

    def interaction(self, interaction_id):
        for it in self.interactions:
            if it.id == interaction_id:
                return it
        raise DanglingEndpoint(f"unknown interaction {interaction_id!r}")

    def interaction_pair(self, interaction_id):
        """Sorted index pair ``(lo, hi)`` of an interaction's endpoints."""
        it = self.interaction(interaction_id)
        a, b = (self.index(e) for e in it.endpoints)
        return (a, b) if a < b else (b, a)

    def permuted(self, order):
        """Same taxonomy with categories reordered; ``order[i]`` is the old index of new slot i."""
        cats = tuple(self.categories[i] for i in order)
        return TokenomicTaxonomy(cats, self.interactions, self.rotations)


def build_taxonomy(categories, interactions=(), rotations=()):
    """Validate and freeze a taxonomy.

    ``categories`` may hold :class:`AgentCategory` objects or plain dicts with
    ``id``/``name``/``kind``; likewise for the other two collections.
    """
    cats = tuple(c if isinstance(c, AgentCategory) else AgentCategory(**c) for c in categories)
    if not cats:
        raise TaxonomyError("no categories declared", field="taxonomy.categories")
    seen = set()
    for c in cats:
        if c.id in seen:
            raise DuplicateId(f"category id {c.id!r} declared twice", field="taxonomy.categories")
        seen.add(c.id)
    n_cm = sum(c.kind is CategoryKind.CONTROL_MECHANISM for c in cats)
    if n_cm != 1:
        if n_cm == 0:
            raise MissingControlMechanism("a ControlMechanism category is required", field="taxonomy.categories")
        raise DuplicateId("more than one ControlMechanism", field="taxonomy.categories")
    if sum(c.kind is CategoryKind.TOKEN_DUMP for c in cats) > 1:
        raise DuplicateId("more than one TokenDump", field="taxonomy.categories")
    if len(cats) < 2:
        raise TaxonomyError("at least two categories are required", field="taxonomy.categories")

    ints = []
    int_ids = set()
    for it in interactions:
        if not isinstance(it, InteractionType):
            it = InteractionType(**it)
        if it.id in int_ids:
            raise DuplicateId(f"interaction id {it.id!r} declared twice", field="taxonomy.interactions")
        int_ids.add(it.id)
        if len(it.endpoints) != 2:
            raise TaxonomyError(f"interaction {it.id!r} needs exactly two endpoints", field="taxonomy.interactions")
        for e in it.endpoints:
            if e not in seen:
                raise DanglingEndpoint(f"interaction {it.id!r} references unknown category {e!r}",
                                       field="taxonomy.interactions")
        if it.endpoints[0] == it.endpoints[1]:
            raise TaxonomyError(f"interaction {it.id!r} joins a category to itself", field="taxonomy.interactions")
        if it.payee not in it.endpoints:
            raise DanglingEndpoint(f"payee {it.payee!r} is not an endpoint of {it.id!r}",
                                   field="taxonomy.interactions")
        ints.append(it)

    rots = []
    rot_keys = set()
    for r in rotations:
        if not isinstance(r, RotationChannel):
            r = RotationChannel(r["from"], r["to"]) if "from" in r else RotationChannel(**r)
        for e in (r.source, r.target):
            if e not in seen:
                raise DanglingEndpoint(f"rotation {r.label} references unknown category {e!r}",
                                       field="taxonomy.rotations")
        if r.source == r.target:
            raise TaxonomyError(f"rotation {r.label} has identical endpoints", field="taxonomy.rotations")
        if (r.source, r.target) in rot_keys:
            raise DuplicateId(f"rotation {r.label} declared twice", field="taxonomy.rotations")
        rot_keys.add((r.source, r.target))
        rots.append(r)

    return TokenomicTaxonomy(cats, tuple(ints), tuple(rots))


@dataclass
class WealthVector:
    values: np.ndarray
    time: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if np.any(self.values < 0):
            raise ValueError("wealth entries must be nonnegative")

    def __len__(self):
        return len(self.values)

    @property
    def total(self):
        return float(self.values.sum())


def circulating_supply(F, taxonomy, M):
    """Supply held outside the Control Mechanism: ``M - F[cm]``."""
    values = F.values if isinstance(F, WealthVector) else np.asarray(F, dtype=float)
    if len(values) != taxonomy.n:
        raise ValueError(f"wealth vector has {len(values)} entries, taxonomy has {taxonomy.n}")
    reserve = values[taxonomy.control_mechanism]
    if reserve < 0 or reserve > M * (1 + 1e-12):
        raise ValueError(f"control mechanism wealth {reserve} outside [0, {M}]")
    return min(max(M - reserve, 0.0), M)
