"""
Conditional-Probability Constraint Checks
=========================================

The supertask constrains a probability function μ by

    μ(H_k ∈ S | H_{k+1} ∈ T) = j / (k+1)   for every T ⊆ P_j(S),

where N(S; B) counts the balls of B_{k+1} whose removal lands in S and
P_j(S) collects the level-(k+1) histories with N(S; B) = j.

At truncation n the check is done per history: grouping F_n by the
level-(k+1) history B, every group must satisfy

    (k+1) · |{outcomes in S with history B}| = N(S; B) · |{outcomes with history B}|.

Summing over B ∈ T gives the identity for every T at once.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple

from core.chain.events import EventSpec, UrnHistory, event_catalog, event_to_json
from core.chain.prefix import ChainPrefix, as_ball_set
from core.config import fraction_str
from core.errors import DomainError, LevelRangeError
from core.exact.enumerator import check_level, enumerate_orders

logger = logging.getLogger(__name__)

History = Tuple[FrozenSet[int], ...]


def count_N(event: EventSpec, urn: FrozenSet[int],
            context: Optional[Mapping[int, FrozenSet[int]]] = None) -> int:
    """
    N(S; B): balls of B_{k+1} whose removal yields a history in S.

    Args:
        event: S at level k
        urn: B_{k+1}, k+1 balls
        context: Urns at levels k+2..horizon when the event reads them

    Returns:
        j with 0 <= j <= k+1
    """
    k = event.level
    urn = as_ball_set(urn)
    if len(urn) != k + 1:
        raise DomainError(f"N(S; B) at level {k} needs {k + 1} balls, got {len(urn)}")

    urns = {int(lvl): frozenset(b) for lvl, b in (context or {}).items()}
    missing = [lvl for lvl in range(k + 2, event.horizon + 1) if lvl not in urns]
    if missing:
        raise LevelRangeError(f"Context does not cover levels {missing} of the event horizon")
    urns[k + 1] = urn

    j = 0
    for ball in urn:
        urns[k] = urn - {ball}
        if event.predicate.holds(UrnHistory(urns)):
            j += 1
    return j


@dataclass(frozen=True)
class HistoryRow:
    """One level-(k+1) history B and its counts within F_n."""

    history: Tuple[Tuple[int, ...], ...]
    outcomes: int
    n_removals: int
    in_event: int

    def to_dict(self) -> Dict:
        return {
            'history': [list(b) for b in self.history],
            'outcomes': self.outcomes,
            'N': self.n_removals,
            'in_event': self.in_event,
        }


@dataclass(frozen=True)
class ConstraintCheck:
    """
    Per-history verification of the constraint identity.

    Attributes:
        k: Event level
        event: S at level k
        n: Truncation level
        per_history: Counts for every level-(k+1) history seen in F_n
    """

    k: int
    event: EventSpec
    n: int
    per_history: Tuple[HistoryRow, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all((self.k + 1) * row.in_event == row.n_removals * row.outcomes
                   for row in self.per_history)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> Dict:
        return {
            'k': self.k,
            'n': self.n,
            'event': event_to_json(self.event),
            'verdict': self.verdict,
            'per_history': [row.to_dict() for row in self.per_history],
            'provenance': 'exact',
        }


def _group_by_history(chain: ChainPrefix, event: EventSpec, n: int,
                      cap: Optional[int]) -> Dict[History, List[int]]:
    k = event.level
    groups: Dict[History, List[int]] = defaultdict(lambda: [0, 0])
    for order in enumerate_orders(chain, n, cap):
        key = order.urns[k:n]
        tally = groups[key]
        tally[0] += 1
        if event.predicate.holds(order):
            tally[1] += 1
    return groups


def _context(chain: ChainPrefix, key: History, k: int, horizon: int) -> Dict[int, FrozenSet[int]]:
    """Urns at levels k+2..horizon: from the history up to n, from the chain above."""
    n = k + len(key)
    context = {lvl: key[lvl - k - 1] for lvl in range(k + 2, n + 1)}
    for lvl in range(n + 1, horizon + 1):
        context[lvl] = chain.level(lvl)
    return context


def _check_event(chain: ChainPrefix, event: EventSpec, n: int) -> None:
    k = event.level
    if not k + 1 <= n:
        raise LevelRangeError(f"Constraint at level {k} needs n >= {k + 1}, got n={n}")
    if event.horizon > len(chain):
        raise LevelRangeError(f"Event horizon {event.horizon} exceeds chain length {len(chain)}")


def verify_constraint(chain: ChainPrefix, event: EventSpec, n: int,
                      cap: Optional[int] = None) -> ConstraintCheck:
    """
    Check the constraint identity for S at truncation n.

    Args:
        chain: Fixed chain of length >= n
        event: S at level k, k + 1 <= n
        n: Truncation level within the cap

    Returns:
        ConstraintCheck with one row per level-(k+1) history
    """
    check_level(chain, n, cap)
    _check_event(chain, event, n)
    k = event.level

    rows = []
    for key, (outcomes, in_event) in _group_by_history(chain, event, n, cap).items():
        j = count_N(event, key[0], _context(chain, key, k, event.horizon))
        rows.append(HistoryRow(tuple(tuple(sorted(b)) for b in key), outcomes, j, in_event))

    rows.sort(key=lambda row: row.history)
    check = ConstraintCheck(k, event, n, tuple(rows))

    if not check.passed:
        logger.warning(f"Constraint identity failed at k={k}, n={n} for {event_to_json(event)}")
    return check


def verify_catalog(chain: ChainPrefix, n: int, cap: Optional[int] = None) -> List[ConstraintCheck]:
    """verify_constraint for every catalog event at every level k < n."""
    checks = []
    for k in range(1, n):
        for event in event_catalog(chain, k, n):
            checks.append(verify_constraint(chain, event, n, cap))
    failed = sum(not c.passed for c in checks)
    logger.info(f"Catalog constraint suite at n={n}: {len(checks)} checks, {failed} failed")
    return checks


@dataclass(frozen=True)
class ConditionalDecomposition:
    """
    μ_n(H_k ∈ S | H_{k+1} ∈ T) computed directly and through P_j(S).

    Attributes:
        direct: x_n(S ∩ T) / x_n(T)
        decomposed: Σ_j (j/(k+1)) · x_n(T ∩ P_j(S)) / x_n(T)
        weights: {j: x_n(T ∩ P_j(S)) / x_n(T)}
    """

    k: int
    n: int
    direct: Fraction
    decomposed: Fraction
    weights: Dict[int, Fraction]

    @property
    def agrees(self) -> bool:
        return self.direct == self.decomposed

    def to_dict(self) -> Dict:
        return {
            'k': self.k,
            'n': self.n,
            'direct': fraction_str(self.direct),
            'decomposed': fraction_str(self.decomposed),
            'weights': {str(j): fraction_str(w) for j, w in sorted(self.weights.items())},
            'agrees': self.agrees,
            'provenance': 'exact',
        }


def decompose_conditional(chain: ChainPrefix, event: EventSpec, given: EventSpec, n: int,
                          cap: Optional[int] = None) -> ConditionalDecomposition:
    """
    Conditional law of god k's removal given H_{k+1} ∈ T at truncation n.

    Args:
        chain: Fixed chain
        event: S at level k
        given: T at level k + 1
        n: Truncation level

    Returns:
        Direct and P_j-decomposed conditional probabilities
    """
    check_level(chain, n, cap)
    _check_event(chain, event, n)
    k = event.level
    if given.level != k + 1:
        raise DomainError(f"Conditioning event must sit at level {k + 1}, got {given.level}")
    if given.horizon > len(chain):
        raise LevelRangeError(f"Event horizon {given.horizon} exceeds chain length {len(chain)}")

    in_t = 0
    in_s_and_t = 0
    by_j: Dict[int, int] = defaultdict(int)
    n_cache: Dict[History, int] = {}

    for order in enumerate_orders(chain, n, cap):
        if not given.predicate.holds(order):
            continue
        in_t += 1
        if event.predicate.holds(order):
            in_s_and_t += 1
        key = order.urns[k:n]
        if key not in n_cache:
            n_cache[key] = count_N(event, key[0], _context(chain, key, k, event.horizon))
        by_j[n_cache[key]] += 1

    if in_t == 0:
        raise DomainError("Conditioning event has density zero at this truncation")

    weights = {j: Fraction(c, in_t) for j, c in by_j.items()}
    decomposed = sum((Fraction(j, k + 1) * w for j, w in weights.items()), Fraction(0))
    return ConditionalDecomposition(k, n, Fraction(in_s_and_t, in_t), decomposed, weights)
