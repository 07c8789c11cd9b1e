"""
Monte Carlo Simulation of the Truncated Supertask
=================================================

Runs gods n-1 down to 1 on Z_n, each removing a uniformly random ball from
the k+1 in the urn, and tallies the surviving ball.

Trials are grouped in fixed-size blocks. Block b draws from
Generator(Philox(SeedSequence(seed, spawn_key=(b,)))), a counter-based
stream keyed only by (seed, b), so reports are identical for any number of
workers and any schedule. Removal orders are sampled directly; the uniform
law of the final ball is checked, never assumed.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import ceil, sqrt
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from core.chain.prefix import ChainPrefix, TargetSet
from core.config import fraction_str
from core.errors import DomainError, LevelRangeError
from core.exact.enumerator import check_level, final_ball_distribution

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 4096


@dataclass(frozen=True)
class SimulationConfig:
    """
    Attributes:
        chain: Fixed chain; the urn starts as Z_n
        trials: Number of independent runs, >= 1
        seed: Non-negative 64-bit seed
        target: Optional A for the R ∈ A statistic
        n: Truncation level (defaults to the chain length)
    """

    chain: ChainPrefix
    trials: int
    seed: int
    target: Optional[TargetSet] = None
    n: Optional[int] = None

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError(f"Simulation needs at least one trial, got {self.trials}")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError(f"Seed must be a 64-bit non-negative integer, got {self.seed}")
        n = len(self.chain) if self.n is None else self.n
        if not 1 <= n <= len(self.chain):
            raise LevelRangeError(f"Truncation level {n} outside chain of length {len(self.chain)}")
        object.__setattr__(self, 'n', n)

    @property
    def balls(self) -> Tuple[int, ...]:
        return self.chain.added[:self.n]


@dataclass(frozen=True)
class SimulationReport:
    """
    Aggregated final-ball counts.

    Attributes:
        n: Truncation level
        trials: Number of runs
        seed: Seed of the stream family
        balls: Z_n in chain order
        counts: Final-ball counts aligned with `balls`
        target: A, if the R ∈ A statistic was requested
        block_size: Trials per random stream
    """

    n: int
    trials: int
    seed: int
    balls: Tuple[int, ...]
    counts: Tuple[int, ...]
    target: Optional[TargetSet] = None
    block_size: int = DEFAULT_BLOCK_SIZE

    def __post_init__(self):
        if sum(self.counts) != self.trials:
            raise DomainError(f"Counts sum to {sum(self.counts)}, expected {self.trials}")

    @property
    def per_ball(self) -> Dict[int, int]:
        return dict(zip(self.balls, self.counts))

    def frequency(self, ball: int) -> float:
        return self.per_ball.get(ball, 0) / self.trials

    @property
    def target_hits(self) -> Optional[int]:
        if self.target is None:
            return None
        return sum(c for b, c in zip(self.balls, self.counts) if self.target.member(b))

    @property
    def target_frequency(self) -> Optional[float]:
        hits = self.target_hits
        return None if hits is None else hits / self.trials

    def counts_frame(self) -> pd.DataFrame:
        """Per-ball counts as a table (ball, count, frequency)."""
        frame = pd.DataFrame({'ball': self.balls, 'count': self.counts})
        frame['frequency'] = frame['count'] / self.trials
        return frame

    def to_dict(self) -> Dict:
        result = {
            'n': self.n,
            'trials': self.trials,
            'seed': self.seed,
            'block_size': self.block_size,
            'counts': {str(b): c for b, c in zip(self.balls, self.counts)},
            'frequencies': {str(b): c / self.trials for b, c in zip(self.balls, self.counts)},
            'provenance': 'sampled',
        }
        if self.target is not None:
            result['target'] = self.target.describe()
            result['target_hits'] = self.target_hits
            result['target_frequency'] = self.target_frequency
        return result


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based stream for one block of trials."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _simulate_block(n: int, seed: int, block: int, size: int) -> np.ndarray:
    """Final-ball index counts for one block of `size` trials."""
    rng = block_rng(seed, block)
    urns = np.tile(np.arange(n, dtype=np.int64), (size, 1))
    rows = np.arange(size)

    # columns [0, k] hold the k+1 balls god k finds
    for k in range(n - 1, 0, -1):
        picks = rng.integers(0, k + 1, size=size)
        urns[rows, picks] = urns[rows, k]

    return np.bincount(urns[:, 0], minlength=n)


def _simulate_blocks(n: int, seed: int, blocks: List[Tuple[int, int]]) -> np.ndarray:
    counts = np.zeros(n, dtype=np.int64)
    for block, size in blocks:
        counts += _simulate_block(n, seed, block, size)
    return counts


def _plan_blocks(trials: int, block_size: int) -> List[Tuple[int, int]]:
    n_blocks = ceil(trials / block_size)
    return [(b, min(block_size, trials - b * block_size)) for b in range(n_blocks)]


def simulate(config: SimulationConfig, workers: int = 1,
             block_size: int = DEFAULT_BLOCK_SIZE) -> SimulationReport:
    """
    Run the truncated supertask `config.trials` times.

    Args:
        config: Chain, trials, seed and optional target
        workers: Process count; 1 runs inline
        block_size: Trials per random stream (part of the reproducibility key)

    Returns:
        SimulationReport with per-ball final counts
    """
    if block_size < 1:
        raise DomainError(f"Block size must be positive, got {block_size}")

    n = config.n
    plan = _plan_blocks(config.trials, block_size)

    if workers <= 1 or len(plan) == 1:
        counts = _simulate_blocks(n, config.seed, plan)
    else:
        workers = min(workers, len(plan))
        per_worker = ceil(len(plan) / workers)
        chunks = [plan[i:i + per_worker] for i in range(0, len(plan), per_worker)]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            partials = list(pool.map(_simulate_blocks, [n] * len(chunks),
                                     [config.seed] * len(chunks), chunks))
        counts = np.sum(partials, axis=0)

    report = SimulationReport(
        n=n,
        trials=config.trials,
        seed=config.seed,
        balls=config.balls,
        counts=tuple(int(c) for c in counts),
        target=config.target,
        block_size=block_size,
    )
    logger.info(f"Simulated {config.trials} trials at n={n} (seed {config.seed}, "
                f"{len(plan)} blocks)")
    return report


def uniformity_test(report: SimulationReport, quantile: float = 0.999) -> Dict:
    """
    Chi-square goodness of fit of the final-ball counts against uniform on Z_n.

    Returns:
        statistic, p_value, critical value at `quantile`, and whether the
        statistic stays below it
    """
    if report.n == 1:
        return {'statistic': 0.0, 'p_value': 1.0, 'critical_value': 0.0,
                'dof': 0, 'uniform': True, 'provenance': 'sampled'}

    statistic, p_value = stats.chisquare(np.asarray(report.counts))
    critical = stats.chi2.ppf(quantile, report.n - 1)
    return {
        'statistic': float(statistic),
        'p_value': float(p_value),
        'critical_value': float(critical),
        'dof': report.n - 1,
        'uniform': bool(statistic < critical),
        'provenance': 'sampled',
    }


def sigma_bound(p: float, trials: int, sigmas: float) -> float:
    """sigmas · sqrt(p(1-p)/trials), the binomial band for a frequency."""
    return sigmas * sqrt(p * (1 - p) / trials)


@dataclass(frozen=True)
class CrosscheckRecord:
    """Monte Carlo frequencies against the exact final-ball law."""

    n: int
    trials: int
    seed: int
    exact: Dict[int, str]
    empirical: Dict[int, float]
    deviations: Dict[int, float]
    bounds: Dict[int, float]
    sigmas: float = 4.0
    report: Optional[SimulationReport] = field(default=None, compare=False, repr=False)

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values())

    @property
    def passed(self) -> bool:
        return all(self.deviations[b] <= self.bounds[b] for b in self.deviations)

    def to_dict(self) -> Dict:
        return {
            'n': self.n,
            'trials': self.trials,
            'seed': self.seed,
            'exact': {str(b): v for b, v in self.exact.items()},
            'empirical': {str(b): v for b, v in self.empirical.items()},
            'max_deviation': self.max_deviation,
            'sigmas': self.sigmas,
            'passed': self.passed,
            'provenance': 'sampled vs exact',
        }


def crosscheck(chain: ChainPrefix, n: int, trials: int, seed: int,
               sigmas: float = 4.0, workers: int = 1,
               block_size: int = DEFAULT_BLOCK_SIZE,
               cap: Optional[int] = None) -> CrosscheckRecord:
    """
    Compare simulate against the exact x_n(R = b) for every ball of Z_n.

    Args:
        chain: Fixed chain
        n: Truncation level within the enumeration cap
        trials: Monte Carlo trials
        seed: Stream seed
        sigmas: Binomial band width for pass/fail

    Returns:
        CrosscheckRecord with per-ball deviations
    """
    check_level(chain, n, cap)
    exact = final_ball_distribution(chain, n, cap=cap)
    report = simulate(SimulationConfig(chain, trials, seed, n=n), workers=workers,
                      block_size=block_size)

    empirical = {b: report.frequency(b) for b in exact}
    deviations = {b: abs(empirical[b] - float(exact[b])) for b in exact}
    bounds = {b: sigma_bound(float(exact[b]), trials, sigmas) for b in exact}

    record = CrosscheckRecord(
        n=n, trials=trials, seed=seed,
        exact={b: fraction_str(v) for b, v in exact.items()},
        empirical=empirical, deviations=deviations, bounds=bounds,
        sigmas=sigmas, report=report,
    )
    if not record.passed:
        logger.warning(f"Crosscheck at n={n} exceeded the {sigmas} sigma band "
                       f"(max deviation {record.max_deviation:.5f})")
    return record


class MonteCarloSimulator:
    """
    Parameterised front end over simulate / crosscheck.

    Reads seed, block size and sigma bands from the `simulation` section of
    config/params_supertask.yaml.
    """

    def __init__(self, params: Dict, workers: int = 1):
        sim = params['simulation']
        self.default_seed = int(sim['default_seed'])
        self.default_trials = int(sim['default_trials'])
        self.block_size = int(sim['block_size'])
        self.report_sigma = float(sim['report_sigma'])
        self.fail_sigma = float(sim['fail_sigma'])
        self.chi_square_quantile = float(sim['chi_square_quantile'])
        self.workers = workers

        logger.info(f"Monte Carlo simulator initialized: seed {self.default_seed}, "
                    f"block size {self.block_size}, {workers} worker(s)")

    def run(self, chain: ChainPrefix, trials: Optional[int] = None, seed: Optional[int] = None,
            target: Optional[TargetSet] = None, n: Optional[int] = None) -> SimulationReport:
        config = SimulationConfig(
            chain=chain,
            trials=self.default_trials if trials is None else trials,
            seed=self.default_seed if seed is None else seed,
            target=target,
            n=n,
        )
        return simulate(config, workers=self.workers, block_size=self.block_size)

    def crosscheck(self, chain: ChainPrefix, n: int, trials: Optional[int] = None,
                   seed: Optional[int] = None) -> CrosscheckRecord:
        return crosscheck(chain, n,
                          self.default_trials if trials is None else trials,
                          self.default_seed if seed is None else seed,
                          sigmas=self.fail_sigma, workers=self.workers,
                          block_size=self.block_size)

    def uniformity(self, report: SimulationReport) -> Dict:
        return uniformity_test(report, self.chi_square_quantile)
