"""
Limit Diagnostics for Density Sequences
=======================================

Computable stand-in for the limit functional L that extends the ordinary
limit to every bounded sequence. No free ultrafilter is computable, but the
steering construction makes the density sequences genuinely convergent, and
on convergent sequences L is the ordinary limit. So a trailing-window test
is enough to read off α_Z(R ∈ A).

Verdicts:
- converged:   window spread (max - min) <= tol; value = window midpoint
- oscillating: spread > tol and the drift between the window halves is
               below half the spread
- undecided:   spread > tol with a drift that dominates; no extrapolation
"""

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import ceil
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from core.config import fraction_str, parse_fraction
from core.errors import DomainError

logger = logging.getLogger(__name__)

SUBSTITUTION_NOTE = ("The ultrafilter limit L is not computable; these estimates are "
                     "trailing-window bounds, which coincide with L on sequences that "
                     "converge.")


class Verdict(Enum):
    CONVERGED = "converged"
    OSCILLATING = "oscillating"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class SequenceDiagnostics:
    """
    Attributes:
        source: Free-text description of the sequence
        window: Trailing fraction examined
        tol: Spread tolerance
        terms: Sequence length
        window_terms: Terms in the trailing window
        liminf: Window minimum
        limsup: Window maximum
        cesaro_mean: Average of all terms (diagnostic float)
        drift: Difference of the window half means (diagnostic float)
        verdict: converged / oscillating / undecided
        value: Window midpoint when converged
    """

    source: str
    window: Fraction
    tol: Fraction
    terms: int
    window_terms: int
    liminf: Fraction
    limsup: Fraction
    cesaro_mean: float
    drift: float
    verdict: Verdict
    value: Optional[Fraction] = None

    @property
    def spread(self) -> Fraction:
        return self.limsup - self.liminf

    def within(self, target: Union[Fraction, str, float], tol: Union[Fraction, str, float]) -> bool:
        """converged with value within tol of target."""
        target, tol = parse_fraction(target), parse_fraction(tol)
        return self.verdict is Verdict.CONVERGED and abs(self.value - target) <= tol

    def to_dict(self) -> Dict:
        return {
            'source': self.source,
            'window': fraction_str(self.window),
            'tol': fraction_str(self.tol),
            'terms': self.terms,
            'window_terms': self.window_terms,
            'liminf_estimate': fraction_str(self.liminf),
            'limsup_estimate': fraction_str(self.limsup),
            'liminf_decimal': float(self.liminf),
            'limsup_decimal': float(self.limsup),
            'cesaro_mean': self.cesaro_mean,
            'drift': self.drift,
            'verdict': self.verdict.value,
            'value': None if self.value is None else fraction_str(self.value),
            'value_decimal': None if self.value is None else float(self.value),
            'provenance': 'diagnostic',
            'note': SUBSTITUTION_NOTE,
        }


def diagnose(seq: Sequence[Union[Fraction, int, str]],
             window: Union[Fraction, float, str] = Fraction(1, 10),
             tol: Union[Fraction, float, str] = Fraction(1, 100),
             source: str = "") -> SequenceDiagnostics:
    """
    Window diagnostics of a finite rational sequence.

    Args:
        seq: Non-empty sequence of rationals
        window: Trailing fraction of the sequence, in (0, 1]
        tol: Spread tolerance for convergence

    Returns:
        SequenceDiagnostics
    """
    terms = [parse_fraction(x) for x in seq]
    if not terms:
        raise DomainError("Cannot diagnose an empty sequence")

    window = parse_fraction(window)
    tol = parse_fraction(tol)
    if not 0 < window <= 1:
        raise DomainError(f"Window fraction must lie in (0, 1], got {window}")
    if tol < 0:
        raise DomainError(f"Tolerance must be non-negative, got {tol}")

    size = max(1, ceil(window * len(terms)))
    tail = terms[-size:]
    low, high = min(tail), max(tail)

    values = np.fromiter((float(x) for x in terms), dtype=float, count=len(terms))
    cesaro = float(values.mean())

    tail_values = values[-size:]
    half = size // 2
    drift = float(tail_values[half:].mean() - tail_values[:half].mean()) if half else 0.0

    if high - low <= tol:
        verdict, value = Verdict.CONVERGED, (low + high) / 2
    elif abs(drift) < float(high - low) / 2:
        verdict, value = Verdict.OSCILLATING, None
    else:
        verdict, value = Verdict.UNDECIDED, None

    logger.debug(f"Diagnosed {source or 'sequence'}: {verdict.value}, "
                 f"window [{float(low):.5f}, {float(high):.5f}]")

    return SequenceDiagnostics(
        source=source, window=window, tol=tol, terms=len(terms), window_terms=size,
        liminf=low, limsup=high, cesaro_mean=cesaro, drift=drift,
        verdict=verdict, value=value,
    )


def trace_from_frame(frame: pd.DataFrame) -> List[Fraction]:
    """Read a trace.csv table back into exact densities."""
    missing = {'density_num', 'density_den'} - set(frame.columns)
    if missing:
        raise DomainError(f"Trace table lacks columns {sorted(missing)}")
    return [Fraction(int(num), int(den))
            for num, den in zip(frame['density_num'], frame['density_den'])]


def read_trace_csv(path) -> List[Fraction]:
    return trace_from_frame(pd.read_csv(path))


class LimitDiagnoser:
    """
    diagnose with window and tolerances from the `limits` config section.

    Targets p in {0, 1} get `boundary_tol`: the square exception steps
    keep the density about 1/sqrt(k) away from them.
    """

    def __init__(self, params: Dict):
        limits = params['limits']
        self.window = parse_fraction(limits['window'])
        self.tol = parse_fraction(limits['tol'])
        self.boundary_tol = parse_fraction(limits['boundary_tol'])

        logger.info(f"Limit diagnoser initialized: window {self.window}, tol {self.tol}")

    def tolerance_for(self, p: Optional[Fraction]) -> Fraction:
        if p is not None and p in (0, 1):
            return self.boundary_tol
        return self.tol

    def diagnose(self, seq: Iterable, p: Optional[Fraction] = None,
                 source: str = "") -> SequenceDiagnostics:
        return diagnose(list(seq), self.window, self.tolerance_for(p), source)
