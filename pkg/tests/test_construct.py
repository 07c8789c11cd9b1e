"""
Chain Construction Tests
========================

Density-steering recursion: golden chains, steering band, coverage and
convergence of the density trace.

Critical validation points:
- Greedy chain for the evens at p = 1/3 matches the narrative example
- Paper rule exception steps at k = j^2 and k = j^2 + 1
- |Z_k ∩ A| - pk stays in [-1, 1] across non-exception steps
- Density within 1/100 of p on [10^3, 10^4] for interior p
"""

import pytest
import numpy as np
from fractions import Fraction
from math import isqrt
from pathlib import Path
import sys

# Add the project root to the path
sys.path.insert(0, str(Path(__file__).parent.parent))

from core.chain.prefix import ChainPrefix, PeriodicWord, ResidueClass
from core.config import load_params
from core.construct.steering import (ChainConstructor, ConstructionConfig, ConstructionMode,
                                     construct_chain, coverage, density_trace, deviation_trace,
                                     is_square_plus_one_step, is_square_step, trace_frame)
from core.errors import ConstructionRefused, DomainError
from core.limits.diagnostics import LimitDiagnoser, Verdict

EVENS = ResidueClass(2, 0)
TARGETS = [EVENS, ResidueClass(3, 0), PeriodicWord("", "10")]
DENSITIES = [Fraction(0), Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(9, 10), Fraction(1)]


def build(target, p, steps, mode=ConstructionMode.PAPER):
    return construct_chain(ConstructionConfig(target, Fraction(p), steps, mode))


@pytest.fixture(scope="module")
def params():
    return load_params(Path(__file__).parent.parent / "config")


class TestGoldenChains:
    """Test the hand-checked prefixes."""

    def test_greedy_evens_one_third(self):
        chain = build(EVENS, Fraction(1, 3), 8, ConstructionMode.GREEDY)

        assert chain.added == (1, 2, 3, 4, 5, 7, 6, 9, 11)
        assert density_trace(chain, EVENS) == [
            Fraction(0), Fraction(1, 2), Fraction(1, 3), Fraction(1, 2), Fraction(2, 5),
            Fraction(1, 3), Fraction(3, 7), Fraction(3, 8), Fraction(1, 3),
        ]

    def test_square_rule_evens_one_third(self):
        chain = build(EVENS, Fraction(1, 3), 10)
        assert chain.added == (1, 2, 3, 4, 6, 5, 7, 9, 11, 8, 13)

    def test_density_trace_short(self):
        assert density_trace(ChainPrefix((1, 2)), EVENS) == [Fraction(0), Fraction(1, 2)]
        assert density_trace(ChainPrefix((1, 2, 3)), EVENS) == [0, Fraction(1, 2), Fraction(1, 3)]

    def test_first_ball_is_one(self):
        for target in TARGETS:
            assert build(target, Fraction(1, 2), 5).added[0] == 1

    def test_deterministic(self):
        assert build(EVENS, Fraction(2, 7), 500) == build(EVENS, Fraction(2, 7), 500)

    def test_p_one_takes_target_outside_exceptions(self):
        chain = build(EVENS, 1, 200)
        for k in range(1, 201):
            if not is_square_plus_one_step(k):
                assert EVENS.member(chain.added[k])


class TestExceptionSteps:
    """Test the j^2 / j^2 + 1 step classification."""

    def test_square_steps(self):
        assert [k for k in range(1, 50) if is_square_step(k)] == [1, 4, 9, 16, 25, 36, 49]

    def test_square_plus_one_steps(self):
        assert [k for k in range(1, 50) if is_square_plus_one_step(k)] == [2, 5, 10, 17, 26, 37]

    def test_disjoint(self):
        assert not any(is_square_step(k) and is_square_plus_one_step(k) for k in range(1, 10000))


class TestValidation:
    """Test config validation and trichotomy refusals."""

    @pytest.mark.parametrize("p,steps", [(Fraction(3, 2), 10), (Fraction(-1, 3), 10), (Fraction(1, 2), 0)])
    def test_invalid_config(self, p, steps):
        with pytest.raises(DomainError):
            ConstructionConfig(EVENS, p, steps)

    @pytest.mark.parametrize("target", [PeriodicWord("0000001", "0"), PeriodicWord("01", "1")])
    def test_refuses_finite_and_cofinite(self, target):
        with pytest.raises(ConstructionRefused, match="trichotomy case split"):
            build(target, Fraction(1, 2), 10)

    def test_mode_from_string(self):
        config = ConstructionConfig(EVENS, "1/3", 8, "greedy")
        assert config.mode is ConstructionMode.GREEDY
        assert config.p == Fraction(1, 3)
        assert ConstructionConfig(EVENS, "1/3", 8, "paper").mode is ConstructionMode.PAPER
        assert ConstructionConfig(EVENS, "1/3", 8, "square").mode is ConstructionMode.PAPER
        with pytest.raises(ValueError):
            ConstructionConfig(EVENS, "1/3", 8, "random")


class TestSteering:
    """Test the balancing invariants of the recursion."""

    @pytest.mark.parametrize("mode", list(ConstructionMode))
    @pytest.mark.parametrize("p", DENSITIES + [Fraction(2, 7), Fraction(5, 6)])
    def test_one_step_band_stability(self, mode, p):
        for target in TARGETS:
            chain = build(target, p, 3000, mode)
            deviations = deviation_trace(chain, target, p)

            for k in range(1, len(chain)):
                exception = is_square_step(k) or is_square_plus_one_step(k)
                if mode is ConstructionMode.PAPER and exception:
                    continue
                if abs(deviations[k - 1]) <= 1:
                    assert abs(deviations[k]) <= 1, f"band left at k={k}"

    @pytest.mark.parametrize("target", TARGETS)
    def test_coverage_of_smallest_elements(self, target):
        chain = build(target, Fraction(1, 3), 10000)
        covered_a, covered_b = coverage(chain, target)

        assert covered_a >= 100
        assert covered_b >= 100

    def test_coverage_counts_initial_segments(self):
        covered = coverage(ChainPrefix((1, 2, 4, 3, 7)), EVENS)
        assert covered == (2, 2)

    def test_greedy_never_covers_for_extreme_p(self):
        chain = build(EVENS, 0, 1000, ConstructionMode.GREEDY)
        assert coverage(chain, EVENS)[0] == 1


class TestConvergence:
    """Test the density trace against p over 10^4 steps."""

    @pytest.mark.parametrize("target", TARGETS, ids=lambda t: t.describe())
    @pytest.mark.parametrize("p", DENSITIES, ids=str)
    def test_density_band(self, target, p):
        chain = build(target, p, 10000)
        trace = density_trace(chain, target)

        for k in range(1000, len(trace) + 1):
            if p in (0, 1):
                bound = Fraction(isqrt(k) + 2, k)
            else:
                bound = Fraction(1, 100)
            assert abs(trace[k - 1] - p) <= bound, f"k={k}: {trace[k - 1]}"

    @pytest.mark.parametrize("target", TARGETS, ids=lambda t: t.describe())
    @pytest.mark.parametrize("p", DENSITIES, ids=str)
    def test_diagnosed_limit(self, params, target, p):
        diagnoser = LimitDiagnoser(params)
        chain = build(target, p, 10000)
        result = diagnoser.diagnose(density_trace(chain, target), p=p)

        assert result.verdict is Verdict.CONVERGED
        assert result.within(p, diagnoser.tolerance_for(p))

    def test_interior_deviation_is_order_one_over_k(self):
        chain = build(EVENS, Fraction(1, 3), 10000)
        deviations = np.array([float(d) for d in deviation_trace(chain, EVENS, Fraction(1, 3))])
        assert np.abs(deviations[100:]).max() <= 2


class TestChainConstructor:
    """Test the parameterised front end."""

    def test_defaults_from_config(self, params):
        constructor = ChainConstructor(params)

        assert constructor.default_steps == 10000
        assert constructor.default_mode is ConstructionMode.PAPER
        assert len(constructor.build(EVENS, "1/2", steps=50)) == 51

    def test_summary(self, params):
        constructor = ChainConstructor(params)
        chain = constructor.build(EVENS, "1/3", steps=8, mode="greedy")
        summary = constructor.summarize(chain, EVENS, "1/3", tail=3)

        assert summary['length'] == 9
        assert summary['head'] == [1, 2, 3]
        assert summary['trace_tail'] == ["3/7", "3/8", "1/3"]
        assert summary['final_density'] == "1/3"

    def test_trace_frame(self):
        chain = build(EVENS, Fraction(1, 3), 8, ConstructionMode.GREEDY)
        frame = trace_frame(chain, EVENS)

        assert list(frame.columns) == ['k', 'count', 'density_num', 'density_den']
        assert frame['k'].tolist() == list(range(1, 10))
        assert frame['count'].tolist() == [0, 1, 1, 2, 2, 2, 3, 3, 3]
        assert frame.iloc[-1]['density_num'] == 1
        assert frame.iloc[-1]['density_den'] == 3


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
