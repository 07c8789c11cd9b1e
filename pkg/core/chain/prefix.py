"""
Chain Prefixes, Target Sets and Removal Orders
==============================================

Finite truncations of the supertask's outcome space.

An outcome is a nested sequence B_1 ⊂ B_2 ⊂ ... with |B_k| = k. A fixed
outcome Z is stored as the sequence of balls it adds (z_1, z_2, ...), so that
Z_k = {z_1, ..., z_k}. A RemovalOrder is one element of F_n: the balls
removed by gods n-1 down to 1 from Z_n, plus the surviving ball.

Balls are positive naturals. All types are immutable.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, Optional, Sequence, Tuple

from core.errors import DomainError, LevelRangeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChainPrefix:
    """
    Finite prefix (Z_1 ⊂ ... ⊂ Z_n) of a fixed outcome.

    Attributes:
        added: Distinct positive naturals (z_1, ..., z_n)
    """

    added: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'added', tuple(int(z) for z in self.added))
        if not self.added:
            raise DomainError("Chain prefix must contain at least one ball")
        if any(z < 1 for z in self.added):
            raise DomainError("Balls are positive naturals")
        if len(set(self.added)) != len(self.added):
            raise DomainError("Chain prefix balls must be pairwise distinct")

    @classmethod
    def natural(cls, n: int) -> 'ChainPrefix':
        """The chain {1}, {1,2}, ..., {1,...,n}."""
        if n < 1:
            raise DomainError(f"Chain length must be positive, got {n}")
        return cls(tuple(range(1, n + 1)))

    def __len__(self) -> int:
        return len(self.added)

    @cached_property
    def positions(self) -> Dict[int, int]:
        """Map ball -> level at which it enters the chain (1-based)."""
        return {z: i for i, z in enumerate(self.added, start=1)}

    def level(self, k: int) -> FrozenSet[int]:
        """
        Return Z_k.

        Args:
            k: Level, 1 <= k <= len(chain)

        Returns:
            The k balls added up to level k
        """
        if not 1 <= k <= len(self.added):
            raise LevelRangeError(f"Level {k} outside chain of length {len(self.added)}")
        return frozenset(self.added[:k])

    def contains(self, k: int, ball: int) -> bool:
        """Whether ball ∈ Z_k."""
        pos = self.positions.get(ball)
        return pos is not None and pos <= k

    def truncate(self, n: int) -> 'ChainPrefix':
        """First n added balls."""
        if not 1 <= n <= len(self.added):
            raise LevelRangeError(f"Cannot truncate chain of length {len(self.added)} to {n}")
        return ChainPrefix(self.added[:n])

    def count_in(self, target: 'TargetSet', k: Optional[int] = None) -> int:
        """|Z_k ∩ A|, with k defaulting to the full length."""
        k = len(self.added) if k is None else k
        if not 0 <= k <= len(self.added):
            raise LevelRangeError(f"Level {k} outside chain of length {len(self.added)}")
        return sum(1 for z in self.added[:k] if target.member(z))


class TargetSet:
    """
    Membership oracle for a target set A ⊆ ℕ.

    Subclasses carry enough structure to decide whether A and A^c are
    infinite, which a bare oracle cannot.
    """

    kind: str = ""

    def member(self, n: int) -> bool:
        raise NotImplementedError

    @property
    def is_finite(self) -> bool:
        return False

    @property
    def is_cofinite(self) -> bool:
        return False

    @property
    def is_balanced(self) -> bool:
        """Both A and A^c infinite."""
        return not (self.is_finite or self.is_cofinite)

    def finite_members(self) -> FrozenSet[int]:
        """Members of A (finite case) or of A^c (cofinite case)."""
        raise DomainError(f"{self.describe()} is neither finite nor cofinite")

    def describe(self) -> str:
        raise NotImplementedError

    def __contains__(self, n: int) -> bool:
        return self.member(n)


@dataclass(frozen=True)
class ResidueClass(TargetSet):
    """A = {n : n ≡ residue (mod modulus)}."""

    modulus: int
    residue: int
    kind: str = field(default="residue", init=False, repr=False)

    def __post_init__(self):
        if self.modulus < 2:
            raise DomainError(f"Residue class modulus must be >= 2, got {self.modulus}")
        if not 0 <= self.residue < self.modulus:
            raise DomainError(f"Residue must lie in [0, {self.modulus}), got {self.residue}")

    def member(self, n: int) -> bool:
        return n % self.modulus == self.residue

    def describe(self) -> str:
        return f"n ≡ {self.residue} (mod {self.modulus})"


@dataclass(frozen=True)
class PeriodicWord(TargetSet):
    """
    A given by its indicator word: prefix bits then a repeating block.

    Bit i (1-based) of prefix + block + block + ... is 1 iff ball i ∈ A.
    A block of all zeros gives a finite set and a block of all ones a
    cofinite one; both are accepted for the bound checks only.
    """

    prefix: str
    block: str
    kind: str = field(default="periodic", init=False, repr=False)

    def __post_init__(self):
        if not self.block:
            raise DomainError("Periodic word needs a non-empty repeating block")
        if set(self.prefix + self.block) - {'0', '1'}:
            raise DomainError("Periodic word bits must be '0' or '1'")

    def member(self, n: int) -> bool:
        if n < 1:
            return False
        i = n - 1
        if i < len(self.prefix):
            return self.prefix[i] == '1'
        return self.block[(i - len(self.prefix)) % len(self.block)] == '1'

    @property
    def is_finite(self) -> bool:
        return '1' not in self.block

    @property
    def is_cofinite(self) -> bool:
        return '0' not in self.block

    def finite_members(self) -> FrozenSet[int]:
        if self.is_finite:
            return frozenset(i + 1 for i, bit in enumerate(self.prefix) if bit == '1')
        if self.is_cofinite:
            return frozenset(i + 1 for i, bit in enumerate(self.prefix) if bit == '0')
        return super().finite_members()

    def describe(self) -> str:
        return f"periodic word {self.prefix}({self.block})*"


@dataclass(frozen=True)
class RemovalOrder:
    """
    One outcome in F_n.

    Attributes:
        base: Fixed chain, of length >= n; levels above n read Z_k
        removed: (r_{n-1}, ..., r_1), r_k being the ball god k removes
        final: The surviving ball, B_1 = {final}
    """

    base: ChainPrefix
    removed: Tuple[int, ...]
    final: int

    @classmethod
    def from_removed(cls, base: ChainPrefix, removed: Sequence[int],
                     n: Optional[int] = None) -> 'RemovalOrder':
        """
        Build a validated order from the removal sequence.

        Args:
            base: Fixed chain
            removed: Balls removed by gods n-1 down to 1
            n: Truncation level (defaults to len(removed) + 1)

        Returns:
            RemovalOrder whose final ball is the one left over
        """
        removed = tuple(int(r) for r in removed)
        n = len(removed) + 1 if n is None else n
        if n != len(removed) + 1:
            raise DomainError(f"Truncation {n} needs {n - 1} removals, got {len(removed)}")
        if n > len(base):
            raise LevelRangeError(f"Truncation {n} exceeds chain length {len(base)}")

        urn = set(base.added[:n])
        for god, ball in zip(range(n - 1, 0, -1), removed):
            if ball not in urn:
                raise DomainError(f"God {god} cannot remove ball {ball}: not in urn {sorted(urn)}")
            urn.remove(ball)

        (final,) = urn
        return cls(base, removed, final)

    @property
    def n(self) -> int:
        return len(self.removed) + 1

    @cached_property
    def removal_levels(self) -> Dict[int, int]:
        """Map ball of Z_n -> god who removed it (0 for the final ball)."""
        n = self.n
        levels = {ball: n - 1 - i for i, ball in enumerate(self.removed)}
        levels[self.final] = 0
        return levels

    @cached_property
    def urns(self) -> Tuple[FrozenSet[int], ...]:
        """(B_1, ..., B_n)."""
        n = self.n
        urns = [frozenset(self.base.added[:n])]
        for ball in self.removed:
            urns.append(urns[-1] - {ball})
        return tuple(reversed(urns))

    def urn(self, k: int) -> FrozenSet[int]:
        """B_k for 1 <= k <= len(base)."""
        if not 1 <= k <= len(self.base):
            raise LevelRangeError(f"Level {k} outside chain of length {len(self.base)}")
        if k >= self.n:
            return self.base.level(k)
        if k == 1:
            return frozenset((self.final,))
        return self.urns[k - 1]

    def contains(self, k: int, ball: int) -> bool:
        """Whether ball ∈ B_k."""
        if not 1 <= k <= len(self.base):
            raise LevelRangeError(f"Level {k} outside chain of length {len(self.base)}")
        if k >= self.n:
            return self.base.contains(k, ball)
        level = self.removal_levels.get(ball)
        return level is not None and level < k

    @property
    def horizon(self) -> int:
        return len(self.base)

    def history(self) -> Tuple[Tuple[int, ...], ...]:
        """Sorted urns (B_1, ..., B_n) for display and golden files."""
        return tuple(tuple(sorted(b)) for b in self.urns)


def urn_at(order: RemovalOrder, k: int) -> FrozenSet[int]:
    """
    Urn contents after god k acted.

    Args:
        order: Outcome in F_n
        k: Level, 1 <= k <= chain length

    Returns:
        B_k (B_n = Z_n)
    """
    return order.urn(k)


def as_ball_set(balls: Iterable[int]) -> FrozenSet[int]:
    """Normalise an iterable of balls, rejecting non-positive entries."""
    result = frozenset(int(b) for b in balls)
    if any(b < 1 for b in result):
        raise DomainError("Balls are positive naturals")
    return result
