"""
Density-Steering Chain Construction
===================================

Builds a fixed outcome Z whose target-set density |Z_k ∩ A| / k is steered
toward a prescribed p. The final-ball probability of the limit probability
function built on Z then equals p.

Recursion (square rule):
    Z_1 = {1}
    a_k = min(A \\ Z_k),  b_k = min(A^c \\ Z_k)
    Z_{k+1} = Z_k ∪ {a_k}  if k = j^2
            = Z_k ∪ {b_k}  if k = j^2 + 1
            = Z_k ∪ {a_k}  if |Z_k ∩ A| / k <= p
            = Z_k ∪ {b_k}  otherwise

The square steps force every natural number into the chain eventually. The
greedy rule drops them and reproduces the narrative example for the evens.

Requires A and A^c infinite; finite and cofinite targets are refused.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import isqrt
from typing import Dict, List, Optional, Tuple, Union

import pandas as pd

from core.chain.prefix import ChainPrefix, TargetSet
from core.config import fraction_str, parse_fraction
from core.errors import ConstructionRefused, DomainError

logger = logging.getLogger(__name__)


class ConstructionMode(Enum):
    """Step rule for the recursion."""
    PAPER = "paper"       # square / square+1 exception steps
    GREEDY = "greedy"     # density comparison only

    @classmethod
    def _missing_(cls, value):
        if value == "square":
            return cls.PAPER
        return None


@dataclass(frozen=True)
class ConstructionConfig:
    """
    Attributes:
        target: Target set A (both A and A^c infinite)
        p: Exact density to steer toward, 0 <= p <= 1
        steps: Recursion steps; the chain has steps + 1 balls
        mode: Step rule
    """

    target: TargetSet
    p: Fraction
    steps: int
    mode: ConstructionMode = ConstructionMode.PAPER

    def __post_init__(self):
        object.__setattr__(self, 'p', parse_fraction(self.p))
        if isinstance(self.mode, str):
            object.__setattr__(self, 'mode', ConstructionMode(self.mode))
        if not 0 <= self.p <= 1:
            raise DomainError(f"Target density must lie in [0, 1], got {self.p}")
        if self.steps < 1:
            raise DomainError(f"Construction needs at least one step, got {self.steps}")


def is_square_step(k: int) -> bool:
    """k = j^2 for some j >= 1."""
    root = isqrt(k)
    return k >= 1 and root * root == k


def is_square_plus_one_step(k: int) -> bool:
    """k = j^2 + 1 for some j >= 1."""
    return k >= 2 and is_square_step(k - 1)


def refusal_message(target: TargetSet) -> str:
    case = "finite" if target.is_finite else "cofinite"
    forced = "0" if target.is_finite else "1"
    return (f"Refusing to construct a chain for {case} target {target.describe()}: "
            f"the trichotomy case split forces mu(R in A) = {forced} for every consistent probability "
            f"function, so no density can be steered. Use the finite-bound check instead.")


def construct_chain(config: ConstructionConfig) -> ChainPrefix:
    """
    Build (z_1, ..., z_{steps+1}) by the selected rule.

    Args:
        config: Target, density, steps and mode

    Returns:
        Chain prefix of length steps + 1 starting at z_1 = 1
    """
    target = config.target
    if not target.is_balanced:
        raise ConstructionRefused(refusal_message(target))

    p_num, p_den = config.p.numerator, config.p.denominator
    square_rule = config.mode is ConstructionMode.PAPER

    added = [1]
    used = {1}
    count = 1 if target.member(1) else 0
    next_a = 1
    next_b = 1

    for k in range(1, config.steps + 1):
        if square_rule and is_square_step(k):
            take_a = True
        elif square_rule and is_square_plus_one_step(k):
            take_a = False
        else:
            # |Z_k ∩ A| / k <= p
            take_a = count * p_den <= p_num * k

        if take_a:
            while next_a in used or not target.member(next_a):
                next_a += 1
            ball = next_a
            count += 1
        else:
            while next_b in used or target.member(next_b):
                next_b += 1
            ball = next_b

        added.append(ball)
        used.add(ball)

    logger.debug(f"Constructed {config.mode.value} chain for {target.describe()}, "
                 f"p={config.p}, {config.steps} steps, final density {count}/{len(added)}")
    return ChainPrefix(tuple(added))


def _counts(chain: ChainPrefix, target: TargetSet) -> List[int]:
    counts = []
    count = 0
    for z in chain.added:
        count += target.member(z)
        counts.append(count)
    return counts


def density_trace(chain: ChainPrefix, target: TargetSet) -> List[Fraction]:
    """(|Z_k ∩ A| / k) for k = 1..n as exact rationals."""
    return [Fraction(c, k) for k, c in enumerate(_counts(chain, target), start=1)]


def deviation_trace(chain: ChainPrefix, target: TargetSet,
                    p: Union[Fraction, str, float]) -> List[Fraction]:
    """(|Z_k ∩ A| - p k) for k = 1..n."""
    p = parse_fraction(p)
    return [c - p * k for k, c in enumerate(_counts(chain, target), start=1)]


def coverage(chain: ChainPrefix, target: TargetSet) -> Tuple[int, int]:
    """
    Length of the initial segments of A and of A^c contained in the chain.

    Returns:
        (m_a, m_b): the m_a smallest elements of A and the m_b smallest
        elements of A^c all appear in the chain, and no longer segment does
    """
    present = set(chain.added)
    covered = {True: 0, False: 0}
    open_ = {True: True, False: True}

    for ball in range(1, max(present) + 2):
        side = target.member(ball)
        if not open_[side]:
            if not any(open_.values()):
                break
            continue
        if ball in present:
            covered[side] += 1
        else:
            open_[side] = False

    return covered[True], covered[False]


def trace_frame(chain: ChainPrefix, target: TargetSet) -> pd.DataFrame:
    """Density trace as the trace.csv table (k, count, density_num, density_den)."""
    counts = _counts(chain, target)
    densities = [Fraction(c, k) for k, c in enumerate(counts, start=1)]
    return pd.DataFrame({
        'k': range(1, len(counts) + 1),
        'count': counts,
        'density_num': [d.numerator for d in densities],
        'density_den': [d.denominator for d in densities],
    })


class ChainConstructor:
    """
    Parameterised front end over construct_chain.

    Defaults for steps and mode come from the `construction` section of
    config/params_supertask.yaml.
    """

    def __init__(self, params: Dict):
        self.default_steps = params['construction']['default_steps']
        self.default_mode = ConstructionMode(params['construction']['default_mode'])

        logger.info(f"Chain constructor initialized: {self.default_mode.value} rule, "
                    f"{self.default_steps} default steps")

    def build(self, target: TargetSet, p: Union[Fraction, str, float],
              steps: Optional[int] = None,
              mode: Optional[Union[ConstructionMode, str]] = None) -> ChainPrefix:
        config = ConstructionConfig(
            target=target,
            p=parse_fraction(p),
            steps=self.default_steps if steps is None else steps,
            mode=self.default_mode if mode is None else ConstructionMode(mode),
        )
        return construct_chain(config)

    def summarize(self, chain: ChainPrefix, target: TargetSet,
                  p: Union[Fraction, str, float], tail: int = 10) -> Dict:
        """Chain summary for reports."""
        p = parse_fraction(p)
        trace = density_trace(chain, target)
        deviations = deviation_trace(chain, target, p)
        covered_a, covered_b = coverage(chain, target)
        return {
            'length': len(chain),
            'head': list(chain.added[:tail]),
            'trace_tail': [fraction_str(d) for d in trace[-tail:]],
            'final_density': fraction_str(trace[-1]),
            'final_density_decimal': float(trace[-1]),
            'max_abs_deviation_band': fraction_str(max(abs(d) for d in deviations)),
            'covered_smallest_in_target': covered_a,
            'covered_smallest_in_complement': covered_b,
        }
