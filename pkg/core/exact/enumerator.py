"""
Exact Enumeration over F_n
==========================

Brute-force engine over the n! outcomes that agree with a fixed chain from
level n upward. Every value is an exact Fraction hits / n!.

Orders are generated in lexicographic removal order: god n-1 tries the
balls of Z_n in ascending order, then god n-2 the remaining ones, and so on.

The order stream partitions into n contiguous blocks by god n-1's choice;
workers take disjoint runs of blocks and integer hit counts are summed, so
results do not depend on the worker count.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import permutations
from math import factorial
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

from core.chain.events import Contains, EventSpec, FinalIs
from core.chain.prefix import ChainPrefix, RemovalOrder, as_ball_set
from core.config import HARD_CAP, effective_cap, fraction_str
from core.errors import CapacityError, DomainError, LevelRangeError

logger = logging.getLogger(__name__)

CACHE_MAX_LEVEL = 8


@dataclass(frozen=True)
class DensityReport:
    """
    x_n(S) with its defining counts.

    Attributes:
        event: The event S
        n: Truncation level
        hits: |S ∩ F_n|
        total: |F_n| = n!
    """

    event: EventSpec
    n: int
    hits: int
    total: int

    def __post_init__(self):
        if self.total != factorial(self.n):
            raise DomainError(f"Total {self.total} is not {self.n}!")
        if not 0 <= self.hits <= self.total:
            raise DomainError(f"Hit count {self.hits} outside [0, {self.total}]")

    @property
    def value(self) -> Fraction:
        return Fraction(self.hits, self.total)

    def to_dict(self) -> Dict:
        return {
            'n': self.n,
            'hits': str(self.hits),
            'total': str(self.total),
            'value': fraction_str(self.value),
            'value_decimal': float(self.value),
            'provenance': 'exact',
        }


def check_level(chain: ChainPrefix, n: int, cap: Optional[int] = None) -> int:
    """
    Validate a truncation level against the chain and the enumeration cap.

    Returns:
        The effective cap used
    """
    cap = effective_cap(HARD_CAP if cap is None else cap)
    if n > cap:
        raise CapacityError(f"Enumeration at n={n} exceeds the cap of {cap} "
                            f"({factorial(cap)} removal orders)")
    if not 1 <= n <= len(chain):
        raise LevelRangeError(f"Truncation level {n} outside chain of length {len(chain)}")
    return cap


def _orders_from(chain: ChainPrefix, n: int, first: Sequence[int]) -> Iterator[RemovalOrder]:
    """Orders whose god n-1 removes one of `first` (ascending), lexicographically."""
    urn = sorted(chain.added[:n])
    if n == 1:
        yield RemovalOrder(chain, (), urn[0])
        return

    for ball in sorted(first):
        rest = [b for b in urn if b != ball]
        # permutations of a sorted pool come out in lexicographic order
        for tail in permutations(rest):
            yield RemovalOrder(chain, (ball,) + tail[:-1], tail[-1])


@lru_cache(maxsize=4)
def _cached_orders(chain: ChainPrefix, n: int) -> Tuple[RemovalOrder, ...]:
    return tuple(_orders_from(chain, n, chain.added[:n]))


def enumerate_orders(chain: ChainPrefix, n: Optional[int] = None,
                     cap: Optional[int] = None) -> Iterator[RemovalOrder]:
    """
    Stream all n! removal orders of F_n.

    Args:
        chain: Fixed chain of length >= n
        n: Truncation level (defaults to the chain length)
        cap: Enumeration cap (defaults to 10, lowered by SUPERTASK_CAP)

    Returns:
        Iterator over RemovalOrder in lexicographic removal order
    """
    n = len(chain) if n is None else n
    check_level(chain, n, cap)
    if n <= CACHE_MAX_LEVEL:
        return iter(_cached_orders(chain, n))
    return _orders_from(chain, n, chain.added[:n])


def _blocks(chain: ChainPrefix, n: int, workers: int) -> List[Tuple[int, ...]]:
    """Split god n-1's choices into `workers` contiguous runs."""
    first = sorted(chain.added[:n])
    workers = max(1, min(workers, len(first)))
    size, extra = divmod(len(first), workers)
    blocks = []
    start = 0
    for w in range(workers):
        stop = start + size + (1 if w < extra else 0)
        blocks.append(tuple(first[start:stop]))
        start = stop
    return [b for b in blocks if b]


def _count_block(chain: ChainPrefix, n: int, events: Tuple[EventSpec, ...],
                 first: Tuple[int, ...]) -> List[int]:
    hits = [0] * len(events)
    for order in _orders_from(chain, n, first):
        for i, event in enumerate(events):
            if event.predicate.holds(order):
                hits[i] += 1
    return hits


def count_hits(chain: ChainPrefix, events: Sequence[EventSpec], n: int,
               workers: int = 1, cap: Optional[int] = None) -> List[int]:
    """
    |S ∩ F_n| for several events in one pass.

    Args:
        chain: Fixed chain
        events: Events whose horizons lie within the chain
        n: Truncation level
        workers: Process count; 1 runs inline
        cap: Enumeration cap

    Returns:
        Hit counts aligned with `events`
    """
    check_level(chain, n, cap)
    events = tuple(events)
    for event in events:
        if event.horizon > len(chain):
            raise LevelRangeError(f"Event horizon {event.horizon} exceeds chain length {len(chain)}")

    if workers <= 1:
        if n <= CACHE_MAX_LEVEL:
            hits = [0] * len(events)
            for order in _cached_orders(chain, n):
                for i, event in enumerate(events):
                    if event.predicate.holds(order):
                        hits[i] += 1
            return hits
        return _count_block(chain, n, events, tuple(chain.added[:n]))

    blocks = _blocks(chain, n, workers)
    logger.debug(f"Counting {len(events)} events over {factorial(n)} orders in {len(blocks)} blocks")
    with ProcessPoolExecutor(max_workers=len(blocks)) as pool:
        partials = list(pool.map(_count_block, [chain] * len(blocks), [n] * len(blocks),
                                 [events] * len(blocks), blocks))
    return [sum(column) for column in zip(*partials)]


def density(chain: ChainPrefix, event: EventSpec, n: int,
            workers: int = 1, cap: Optional[int] = None) -> DensityReport:
    """
    x_n(S) = |S ∩ F_n| / n! by full enumeration.

    Args:
        chain: Fixed chain of length >= n
        event: Event S with horizon within the chain
        n: Truncation level

    Returns:
        DensityReport with exact counts
    """
    (hits,) = count_hits(chain, [event], n, workers=workers, cap=cap)
    report = DensityReport(event, n, hits, factorial(n))
    logger.debug(f"x_{n} = {report.value} ({hits}/{report.total})")
    return report


def survival_density(chain: ChainPrefix, ball: int, k: int, n: int,
                     workers: int = 1, cap: Optional[int] = None) -> Fraction:
    """
    x_n(a ∈ B_k): the chance ball a survives gods n-1 down to k.

    Args:
        chain: Fixed chain
        ball: a ∈ Z_n
        k: Level, 1 <= k <= n
        n: Truncation level

    Returns:
        Exact rational, equal to k / n
    """
    check_level(chain, n, cap)
    if not chain.contains(n, ball):
        raise DomainError(f"Ball {ball} is not in Z_{n}")
    if not 1 <= k <= n:
        raise LevelRangeError(f"Survival level {k} outside [1, {n}]")
    return density(chain, EventSpec(k, Contains(k, ball)), n, workers=workers, cap=cap).value


def survival_profile(chain: ChainPrefix, n: int,
                     cap: Optional[int] = None) -> Dict[Tuple[int, int], Fraction]:
    """
    Every survival density at truncation n in one enumeration pass.

    Returns:
        {(a, k): x_n(a ∈ B_k)} for a ∈ Z_n and 1 <= k <= n
    """
    check_level(chain, n, cap)
    balls = chain.added[:n]
    survived = {(a, k): 0 for a in balls for k in range(1, n + 1)}

    for order in enumerate_orders(chain, n, cap):
        for a, removed_by in order.removal_levels.items():
            for k in range(removed_by + 1, n + 1):
                survived[(a, k)] += 1

    total = factorial(n)
    return {key: Fraction(hits, total) for key, hits in survived.items()}


def final_ball_distribution(chain: ChainPrefix, n: int, workers: int = 1,
                            cap: Optional[int] = None) -> Dict[int, Fraction]:
    """Exact law of R at truncation n."""
    balls = chain.added[:n]
    events = [EventSpec(1, FinalIs(b)) for b in balls]
    hits = count_hits(chain, events, n, workers=workers, cap=cap)
    total = factorial(n)
    return {b: Fraction(h, total) for b, h in zip(balls, hits)}


def finite_set_bound(chain: ChainPrefix, finite_set: Iterable[int], n: int) -> Fraction:
    """
    x_n(R ∈ A) for finite A, by the combinatorial formula |Z_n ∩ A| / n.

    The formula follows from the uniform final ball and needs no
    enumeration, so n may be as large as the chain.

    Args:
        chain: Fixed chain of length >= n
        finite_set: Explicit finite A
        n: Truncation level

    Returns:
        Exact rational, asserted <= |A| / n
    """
    if not 1 <= n <= len(chain):
        raise LevelRangeError(f"Truncation level {n} outside chain of length {len(chain)}")
    members = as_ball_set(finite_set)
    hits = sum(1 for z in chain.added[:n] if z in members)
    value = Fraction(hits, n)
    if value > Fraction(len(members), n):
        raise AssertionError(f"x_{n}(R in A) = {value} exceeds |A|/n = {len(members)}/{n}")
    return value


def cofinite_set_bound(chain: ChainPrefix, complement: Iterable[int], n: int) -> Fraction:
    """
    x_n(R ∈ A) for cofinite A given by its finite complement C.

    Returns:
        1 - |Z_n ∩ C| / n, asserted >= 1 - |C| / n
    """
    members = as_ball_set(complement)
    value = 1 - finite_set_bound(chain, members, n)
    if value < 1 - Fraction(len(members), n):
        raise AssertionError(f"x_{n}(R in A) = {value} below 1 - |A^c|/n")
    return value


def exact_final_in(chain: ChainPrefix, members: FrozenSet[int], n: int,
                   cap: Optional[int] = None) -> Fraction:
    """x_n(R ∈ members) by enumeration, for cross-checking the bound formula."""
    events = [EventSpec(1, FinalIs(b)) for b in chain.added[:n] if b in members]
    if not events:
        check_level(chain, n, cap)
        return Fraction(0)
    return Fraction(sum(count_hits(chain, events, n, cap=cap)), factorial(n))
