"""
Finitely Observable Events
==========================

Events on Ω_k expressed as a closed algebra of atoms combined with
and / or / not. Each atom reads the urn at one level, so an event at level k
with horizon h depends only on (B_k, ..., B_h).

Atoms:
- Contains(ℓ, b):      b ∈ B_ℓ
- Equals(ℓ, X):        B_ℓ = X, |X| = ℓ
- FinalIs(b):          B_1 = {b}            (level-1 events only)
- FinalInTarget(A):    the ball of B_1 ∈ A  (level-1 events only)

Events serialise to nested JSON objects keyed by "op".
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

from core.chain.prefix import (ChainPrefix, PeriodicWord, RemovalOrder, ResidueClass,
                               TargetSet, as_ball_set)
from core.errors import DomainError, LevelRangeError

logger = logging.getLogger(__name__)


class UrnHistory:
    """
    Explicit urns at a range of levels, used where no RemovalOrder exists
    (e.g. the hypothetical histories built by count_N).
    """

    def __init__(self, urns: Mapping[int, FrozenSet[int]]):
        self._urns = {int(k): frozenset(v) for k, v in urns.items()}

    def urn(self, k: int) -> FrozenSet[int]:
        try:
            return self._urns[k]
        except KeyError:
            raise LevelRangeError(f"History has no urn at level {k}") from None

    def contains(self, k: int, ball: int) -> bool:
        return ball in self.urn(k)

    @property
    def levels(self) -> Tuple[int, ...]:
        return tuple(sorted(self._urns))


class Predicate:
    """Node of the event algebra."""

    def holds(self, history) -> bool:
        raise NotImplementedError

    def levels(self) -> FrozenSet[int]:
        """Levels of every atom below this node."""
        raise NotImplementedError

    def atoms(self) -> List['Predicate']:
        raise NotImplementedError

    def to_json(self) -> Dict[str, Any]:
        raise NotImplementedError

    def __and__(self, other: 'Predicate') -> 'Predicate':
        return And((self, other))

    def __or__(self, other: 'Predicate') -> 'Predicate':
        return Or((self, other))

    def __invert__(self) -> 'Predicate':
        return Not(self)


@dataclass(frozen=True)
class Contains(Predicate):
    level: int
    ball: int

    def __post_init__(self):
        if self.level < 1 or self.ball < 1:
            raise DomainError(f"Contains needs positive level and ball, got ({self.level}, {self.ball})")

    def holds(self, history) -> bool:
        return history.contains(self.level, self.ball)

    def levels(self) -> FrozenSet[int]:
        return frozenset((self.level,))

    def atoms(self) -> List[Predicate]:
        return [self]

    def to_json(self) -> Dict[str, Any]:
        return {'op': 'atom', 'atom': 'contains', 'level': self.level, 'ball': self.ball}


@dataclass(frozen=True)
class Equals(Predicate):
    level: int
    balls: FrozenSet[int]

    def __post_init__(self):
        object.__setattr__(self, 'balls', as_ball_set(self.balls))
        if len(self.balls) != self.level:
            raise DomainError(f"Equals at level {self.level} needs {self.level} balls, "
                              f"got {len(self.balls)}")

    def holds(self, history) -> bool:
        return history.urn(self.level) == self.balls

    def levels(self) -> FrozenSet[int]:
        return frozenset((self.level,))

    def atoms(self) -> List[Predicate]:
        return [self]

    def to_json(self) -> Dict[str, Any]:
        return {'op': 'atom', 'atom': 'equals', 'level': self.level, 'balls': sorted(self.balls)}


@dataclass(frozen=True)
class FinalIs(Predicate):
    ball: int

    def holds(self, history) -> bool:
        return history.contains(1, self.ball)

    def levels(self) -> FrozenSet[int]:
        return frozenset((1,))

    def atoms(self) -> List[Predicate]:
        return [self]

    def to_json(self) -> Dict[str, Any]:
        return {'op': 'atom', 'atom': 'final_is', 'ball': self.ball}


@dataclass(frozen=True)
class FinalInTarget(Predicate):
    target: TargetSet

    def holds(self, history) -> bool:
        (ball,) = history.urn(1)
        return self.target.member(ball)

    def levels(self) -> FrozenSet[int]:
        return frozenset((1,))

    def atoms(self) -> List[Predicate]:
        return [self]

    def to_json(self) -> Dict[str, Any]:
        return {'op': 'atom', 'atom': 'final_in_target', 'target': target_to_json(self.target)}


@dataclass(frozen=True)
class And(Predicate):
    """Conjunction; the empty conjunction is the always-true event."""

    args: Tuple[Predicate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'args', tuple(self.args))

    def holds(self, history) -> bool:
        return all(arg.holds(history) for arg in self.args)

    def levels(self) -> FrozenSet[int]:
        return frozenset().union(*(arg.levels() for arg in self.args))

    def atoms(self) -> List[Predicate]:
        return [atom for arg in self.args for atom in arg.atoms()]

    def to_json(self) -> Dict[str, Any]:
        return {'op': 'and', 'args': [arg.to_json() for arg in self.args]}


@dataclass(frozen=True)
class Or(Predicate):
    args: Tuple[Predicate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'args', tuple(self.args))

    def holds(self, history) -> bool:
        return any(arg.holds(history) for arg in self.args)

    def levels(self) -> FrozenSet[int]:
        return frozenset().union(*(arg.levels() for arg in self.args))

    def atoms(self) -> List[Predicate]:
        return [atom for arg in self.args for atom in arg.atoms()]

    def to_json(self) -> Dict[str, Any]:
        return {'op': 'or', 'args': [arg.to_json() for arg in self.args]}


@dataclass(frozen=True)
class Not(Predicate):
    arg: Predicate

    def holds(self, history) -> bool:
        return not self.arg.holds(history)

    def levels(self) -> FrozenSet[int]:
        return self.arg.levels()

    def atoms(self) -> List[Predicate]:
        return self.arg.atoms()

    def to_json(self) -> Dict[str, Any]:
        return {'op': 'not', 'arg': self.arg.to_json()}


ALWAYS = And(())


@dataclass(frozen=True)
class EventSpec:
    """
    Event S ⊆ Ω_k, observable on levels k..horizon.

    Attributes:
        level: k >= 1
        predicate: Atom algebra over urns at levels k..horizon
        horizon: Highest level read; defaults to the highest atom level
    """

    level: int
    predicate: Predicate = ALWAYS
    horizon: Optional[int] = field(default=None)

    def __post_init__(self):
        if self.level < 1:
            raise DomainError(f"Event level must be >= 1, got {self.level}")

        atom_levels = self.predicate.levels()
        horizon = max(atom_levels | {self.level}) if self.horizon is None else self.horizon
        object.__setattr__(self, 'horizon', horizon)

        if horizon < self.level:
            raise DomainError(f"Horizon {horizon} below event level {self.level}")
        for atom in self.predicate.atoms():
            if isinstance(atom, (FinalIs, FinalInTarget)) and self.level != 1:
                raise DomainError(f"{type(atom).__name__} is only observable on level-1 events")
            for lvl in atom.levels():
                if not self.level <= lvl <= horizon:
                    raise DomainError(f"Atom level {lvl} outside [{self.level}, {horizon}]")

    @classmethod
    def always(cls, level: int) -> 'EventSpec':
        return cls(level, ALWAYS)

    def union(self, other: 'EventSpec') -> 'EventSpec':
        self._check_same_level(other)
        return EventSpec(self.level, Or((self.predicate, other.predicate)),
                         max(self.horizon, other.horizon))

    def intersection(self, other: 'EventSpec') -> 'EventSpec':
        self._check_same_level(other)
        return EventSpec(self.level, And((self.predicate, other.predicate)),
                         max(self.horizon, other.horizon))

    def complement(self) -> 'EventSpec':
        return EventSpec(self.level, Not(self.predicate), self.horizon)

    def with_horizon(self, horizon: int) -> 'EventSpec':
        return EventSpec(self.level, self.predicate, horizon)

    def holds(self, history) -> bool:
        return self.predicate.holds(history)

    def _check_same_level(self, other: 'EventSpec') -> None:
        if other.level != self.level:
            raise DomainError(f"Cannot combine events at levels {self.level} and {other.level}")


def eval_event(spec: EventSpec, order: RemovalOrder) -> bool:
    """
    Evaluate H_k ∈ S on one outcome.

    Args:
        spec: Event at level k with horizon h
        order: Outcome whose chain covers the horizon

    Returns:
        True iff the outcome's urns satisfy the predicate
    """
    if spec.horizon > order.horizon:
        raise LevelRangeError(f"Event horizon {spec.horizon} exceeds chain length {order.horizon}")
    return spec.predicate.holds(order)


# ── JSON codecs ──

def chain_to_json(chain: ChainPrefix) -> Dict[str, Any]:
    return {'added': list(chain.added)}


def chain_from_json(data: Mapping[str, Any]) -> ChainPrefix:
    try:
        return ChainPrefix(tuple(data['added']))
    except (KeyError, TypeError) as e:
        raise DomainError(f"Invalid chain JSON: {e}") from e


def target_to_json(target: TargetSet) -> Dict[str, Any]:
    if isinstance(target, ResidueClass):
        return {'kind': 'residue', 'mod': target.modulus, 'res': target.residue}
    if isinstance(target, PeriodicWord):
        return {'kind': 'periodic', 'prefix': target.prefix, 'block': target.block}
    raise DomainError(f"Unserialisable target {target!r}")


def target_from_json(data: Mapping[str, Any]) -> TargetSet:
    kind = data.get('kind')
    try:
        if kind == 'residue':
            return ResidueClass(int(data['mod']), int(data['res']))
        if kind == 'periodic':
            return PeriodicWord(str(data.get('prefix', '')), str(data['block']))
    except (KeyError, TypeError, ValueError) as e:
        raise DomainError(f"Invalid target JSON: {e}") from e
    raise DomainError(f"Unknown target kind {kind!r}")


def predicate_from_json(data: Mapping[str, Any]) -> Predicate:
    op = data.get('op')
    try:
        if op == 'and':
            return And(tuple(predicate_from_json(a) for a in data.get('args', [])))
        if op == 'or':
            return Or(tuple(predicate_from_json(a) for a in data.get('args', [])))
        if op == 'not':
            return Not(predicate_from_json(data['arg']))
        if op == 'atom':
            atom = data.get('atom')
            if atom == 'contains':
                return Contains(int(data['level']), int(data['ball']))
            if atom == 'equals':
                return Equals(int(data['level']), frozenset(data['balls']))
            if atom == 'final_is':
                return FinalIs(int(data['ball']))
            if atom == 'final_in_target':
                return FinalInTarget(target_from_json(data['target']))
            raise DomainError(f"Unknown atom {atom!r}")
    except (KeyError, TypeError) as e:
        raise DomainError(f"Invalid event JSON: {e}") from e
    raise DomainError(f"Unknown event op {op!r}")


def event_to_json(spec: EventSpec) -> Dict[str, Any]:
    return {'level': spec.level, 'horizon': spec.horizon, 'predicate': spec.predicate.to_json()}


def event_from_json(data: Mapping[str, Any]) -> EventSpec:
    """Parse {"level": k, "horizon": h, "predicate": {...}}; a bare predicate is level 1."""
    if 'predicate' not in data:
        return EventSpec(1, predicate_from_json(data))
    horizon = data.get('horizon')
    return EventSpec(int(data['level']), predicate_from_json(data['predicate']),
                     None if horizon is None else int(horizon))


# ── Catalog ──

def event_catalog(chain: ChainPrefix, k: int, n: Optional[int] = None) -> List[EventSpec]:
    """
    Finite catalog of events at level k used by the exhaustive suites.

    Args:
        chain: Fixed chain the events refer to
        k: Event level
        n: Truncation level the events will be evaluated at (defaults to chain length)

    Returns:
        Events whose horizon never exceeds the chain length
    """
    n = len(chain) if n is None else n
    if not 1 <= k <= len(chain):
        raise LevelRangeError(f"Level {k} outside chain of length {len(chain)}")

    z = chain.added
    top = z[min(n, len(z)) - 1]
    catalog = [
        EventSpec.always(k),
        EventSpec(k, Contains(k, z[0])),
        EventSpec(k, Not(Contains(k, z[0]))),
        EventSpec(k, Contains(k, top)),
        EventSpec(k, Equals(k, frozenset(z[:k]))),
    ]
    if len(z) > k:
        catalog.append(EventSpec(k, Equals(k, frozenset(z[1:k + 1]))))
        catalog.append(EventSpec(k, And((Contains(k, z[0]), Contains(k + 1, z[k])))))
    if len(z) >= 2:
        catalog.append(EventSpec(k, Or((Contains(k, z[0]), Contains(k, z[1])))))
        catalog.append(EventSpec(k, And((Contains(k, top), Not(Contains(k, z[1]))))))
    if k == 1:
        catalog.append(EventSpec(1, FinalIs(z[0])))
        catalog.append(EventSpec(1, FinalInTarget(ResidueClass(2, 0))))
        catalog.append(EventSpec(1, FinalInTarget(ResidueClass(3, 0))))
        catalog.append(EventSpec(1, Or((FinalIs(z[0]), FinalInTarget(PeriodicWord('', '10'))))))

    logger.debug(f"Event catalog at level {k}: {len(catalog)} events")
    return catalog
