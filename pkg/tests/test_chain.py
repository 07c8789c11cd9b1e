"""
Chain Core Tests
================

Chain prefixes, target sets, removal orders and the event algebra.

Critical validation points:
- Z_k and B_k lookups, including levels above the truncation
- Trichotomy case structure of target sets
- Event validation and evaluation on single outcomes
- JSON codecs used by the CLI
"""

import pytest
from hypothesis import given, settings
from hypothesis.strategies import permutations
from pathlib import Path
import sys

# Add the project root to the path
sys.path.insert(0, str(Path(__file__).parent.parent))

from core.chain.events import (ALWAYS, And, Contains, Equals, EventSpec, FinalInTarget, FinalIs,
                               Not, Or, eval_event, event_catalog, event_from_json,
                               event_to_json, target_from_json, target_to_json)
from core.chain.prefix import ChainPrefix, PeriodicWord, RemovalOrder, ResidueClass, urn_at
from core.errors import DomainError, LevelRangeError
from core.exact.constraint import verify_constraint
from core.exact.enumerator import enumerate_orders


@pytest.fixture
def greedy_chain():
    """Greedy chain for the evens at p = 1/3."""
    return ChainPrefix((1, 2, 3, 4, 5, 7, 6, 9, 11))


@pytest.fixture
def evens():
    return ResidueClass(2, 0)


class TestChainPrefix:
    """Test chain prefix validation and lookups."""

    def test_levels(self, greedy_chain):
        assert len(greedy_chain) == 9
        assert greedy_chain.level(1) == {1}
        assert greedy_chain.level(6) == {1, 2, 3, 4, 5, 7}
        assert greedy_chain.level(9) == {1, 2, 3, 4, 5, 6, 7, 9, 11}

    def test_level_out_of_range(self, greedy_chain):
        with pytest.raises(LevelRangeError):
            greedy_chain.level(0)
        with pytest.raises(IndexError):
            greedy_chain.level(10)

    @pytest.mark.parametrize("added", [(), (1, 0), (1, 2, 1), (-3,)])
    def test_invalid_prefixes(self, added):
        with pytest.raises(ValueError):
            ChainPrefix(added)

    def test_contains_and_positions(self, greedy_chain):
        assert greedy_chain.contains(6, 7)
        assert not greedy_chain.contains(6, 6)
        assert greedy_chain.contains(7, 6)
        assert not greedy_chain.contains(9, 8)
        assert greedy_chain.positions[11] == 9

    def test_natural_and_truncate(self, greedy_chain):
        assert ChainPrefix.natural(4).added == (1, 2, 3, 4)
        assert greedy_chain.truncate(3) == ChainPrefix((1, 2, 3))
        with pytest.raises(LevelRangeError):
            greedy_chain.truncate(10)

    def test_count_in(self, greedy_chain, evens):
        assert greedy_chain.count_in(evens) == 3
        assert greedy_chain.count_in(evens, 2) == 1
        assert greedy_chain.count_in(evens, 0) == 0


class TestTargetSets:
    """Test membership and the finite / cofinite / balanced split."""

    def test_residue_class(self):
        multiples_of_3 = ResidueClass(3, 0)
        assert [b for b in range(1, 10) if b in multiples_of_3] == [3, 6, 9]
        assert multiples_of_3.is_balanced

    @pytest.mark.parametrize("modulus,residue", [(1, 0), (2, 2), (3, -1)])
    def test_invalid_residue_class(self, modulus, residue):
        with pytest.raises(DomainError):
            ResidueClass(modulus, residue)

    def test_periodic_word_odds(self):
        odds = PeriodicWord("", "10")
        assert [b for b in range(1, 8) if odds.member(b)] == [1, 3, 5, 7]
        assert odds.is_balanced

    def test_periodic_word_finite(self):
        seven = PeriodicWord("0000001", "0")
        assert seven.is_finite and not seven.is_balanced
        assert seven.finite_members() == {7}
        assert not seven.member(14)

    def test_periodic_word_cofinite(self):
        tail = PeriodicWord("010", "1")
        assert tail.is_cofinite
        assert tail.finite_members() == {1, 3}
        assert tail.member(2) and tail.member(100)

    def test_balanced_has_no_finite_members(self):
        with pytest.raises(DomainError):
            ResidueClass(2, 0).finite_members()

    def test_invalid_periodic_word(self):
        with pytest.raises(DomainError):
            PeriodicWord("012", "1")
        with pytest.raises(DomainError):
            PeriodicWord("1", "")


class TestRemovalOrder:
    """Test single outcomes of F_n."""

    def test_from_removed(self):
        order = RemovalOrder.from_removed(ChainPrefix.natural(3), (1, 2))

        assert order.n == 3
        assert order.final == 3
        assert order.history() == ((3,), (2, 3), (1, 2, 3))
        assert order.removal_levels == {1: 2, 2: 1, 3: 0}

    def test_invalid_removal(self):
        with pytest.raises(DomainError):
            RemovalOrder.from_removed(ChainPrefix.natural(3), (1, 1))
        with pytest.raises(DomainError):
            RemovalOrder.from_removed(ChainPrefix.natural(3), (4, 1))
        with pytest.raises(LevelRangeError):
            RemovalOrder.from_removed(ChainPrefix.natural(2), (1, 2))

    def test_levels_above_truncation_read_chain(self):
        order = RemovalOrder.from_removed(ChainPrefix.natural(5), (2, 1))

        assert urn_at(order, 1) == {3}
        assert urn_at(order, 2) == {1, 3}
        assert urn_at(order, 3) == {1, 2, 3}
        assert urn_at(order, 5) == {1, 2, 3, 4, 5}
        assert order.contains(4, 4)
        with pytest.raises(LevelRangeError):
            urn_at(order, 6)

    @settings(max_examples=50, deadline=None)
    @given(permutations([1, 2, 3, 4, 5, 6]))
    def test_urns_are_nested(self, perm):
        chain = ChainPrefix((4, 1, 6, 2, 5, 3))
        order = RemovalOrder.from_removed(chain, perm[:5])

        assert order.final == perm[5]
        urns = order.urns
        for k in range(1, 6):
            assert len(urns[k - 1]) == k
            assert urns[k - 1] < urns[k]
            assert urns[k] - urns[k - 1] == {order.removed[5 - k]}
            assert order.contains(k, order.final)
            assert order.removal_levels[order.removed[5 - k]] == k


class TestEvents:
    """Test event validation and evaluation."""

    def test_eval_event(self):
        order = RemovalOrder.from_removed(ChainPrefix.natural(4), (4, 1, 2))

        assert order.final == 3
        assert eval_event(EventSpec(2, Contains(2, 3)), order)
        assert not eval_event(EventSpec(2, Contains(2, 1)), order)
        assert eval_event(EventSpec(1, FinalIs(order.final)), order)
        assert eval_event(EventSpec(1, Contains(1, 2) | Contains(1, 3)), order)
        assert eval_event(EventSpec(3, ~Contains(3, 4)), order)
        assert eval_event(EventSpec.always(2), order)

    def test_event_beyond_chain(self):
        order = RemovalOrder.from_removed(ChainPrefix.natural(3), (1, 2))
        with pytest.raises(LevelRangeError):
            eval_event(EventSpec(1, Contains(4, 1)), order)

    def test_final_atoms_only_at_level_one(self):
        with pytest.raises(DomainError):
            EventSpec(2, FinalIs(1))
        with pytest.raises(DomainError):
            EventSpec(2, FinalInTarget(ResidueClass(2, 0)))

    def test_atom_below_event_level(self):
        with pytest.raises(DomainError):
            EventSpec(3, Contains(2, 1))

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
    def test_widened_horizon_keeps_meaning(self, k):
        chain = ChainPrefix((3, 1, 4, 2, 6, 5, 8))
        orders = list(enumerate_orders(chain, 6))

        for event in event_catalog(chain, k, n=6):
            for horizon in range(event.horizon, len(chain) + 1):
                widened = event.with_horizon(horizon)
                assert widened.horizon == horizon
                assert all(eval_event(event, o) == eval_event(widened, o) for o in orders)

            widest = event.with_horizon(len(chain))
            check = verify_constraint(chain, widest, 6)
            assert check.passed, event_to_json(widest)

    def test_horizon_defaults_to_highest_atom(self):
        spec = EventSpec(2, And((Contains(2, 1), Contains(5, 4))))
        assert spec.horizon == 5
        assert EventSpec(3).horizon == 3
        assert EventSpec(3).predicate == ALWAYS

    def test_equals_cardinality(self):
        with pytest.raises(DomainError):
            Equals(2, frozenset({1, 2, 3}))

    def test_combinators(self):
        a = EventSpec(2, Contains(2, 1))
        b = EventSpec(2, Contains(2, 2))

        assert a.union(b).predicate == Or((a.predicate, b.predicate))
        assert a.intersection(b).predicate == And((a.predicate, b.predicate))
        assert a.complement().predicate == Not(a.predicate)
        with pytest.raises(DomainError):
            a.union(EventSpec(3, Contains(3, 1)))

    def test_catalog(self, greedy_chain):
        level_one = event_catalog(greedy_chain, 1, n=5)
        assert all(e.level == 1 for e in level_one)
        assert EventSpec(1, FinalIs(1)) in level_one
        assert all(e.horizon <= len(greedy_chain) for e in level_one)

        level_three = event_catalog(greedy_chain, 3)
        assert not any(isinstance(a, (FinalIs, FinalInTarget))
                       for e in level_three for a in e.predicate.atoms())

        with pytest.raises(LevelRangeError):
            event_catalog(greedy_chain, 10)


class TestJsonCodecs:
    """Test the JSON shapes read by the CLI."""

    def test_catalog_events_survive_json(self, greedy_chain):
        for k in (1, 2, 4):
            for event in event_catalog(greedy_chain, k, n=6):
                assert event_from_json(event_to_json(event)) == event

    def test_bare_predicate_is_level_one(self):
        event = event_from_json({'op': 'atom', 'atom': 'final_is', 'ball': 2})
        assert event == EventSpec(1, FinalIs(2))

    def test_target_shapes(self):
        assert target_to_json(ResidueClass(3, 1)) == {'kind': 'residue', 'mod': 3, 'res': 1}
        assert target_from_json({'kind': 'periodic', 'block': '10'}) == PeriodicWord('', '10')

    @pytest.mark.parametrize("payload", [
        {'kind': 'prime'},
        {'kind': 'residue', 'mod': 2},
        {'kind': 'residue', 'mod': 'two', 'res': 0},
    ])
    def test_invalid_targets(self, payload):
        with pytest.raises(DomainError):
            target_from_json(payload)

    def test_invalid_events(self):
        with pytest.raises(DomainError):
            event_from_json({'op': 'xor'})
        with pytest.raises(DomainError):
            event_from_json({'op': 'atom', 'atom': 'contains', 'level': 1})


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
