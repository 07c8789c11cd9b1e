"""
Supertask Engine - Experiment Orchestration
===========================================

Ties the lab together into reproducible experiments:
1. Classify the target set by the trichotomy case split
2. Steer a chain toward each requested density (infinite / co-infinite A)
3. Verify exactly at the enumeration level (density bridge, constraint identity)
4. Cross-check with Monte Carlo
5. Diagnose the density trace in place of the limit functional
6. Bound x_n(R ∈ A) for finite and cofinite A without enumeration

Every numeric field of the resulting report is tagged exact, sampled or
diagnostic.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

from core.chain.events import EventSpec, FinalInTarget, target_from_json, target_to_json
from core.chain.prefix import ChainPrefix, PeriodicWord, ResidueClass, TargetSet, as_ball_set
from core.config import fraction_str, load_params, parse_fraction
from core.construct.steering import (ChainConstructor, ConstructionMode, density_trace,
                                     refusal_message, trace_frame)
from core.errors import ConstructionRefused, DomainError, ManifestError
from core.exact.constraint import verify_constraint
from core.exact.enumerator import (cofinite_set_bound, density, exact_final_in,
                                   finite_set_bound)
from core.io import artifacts
from core.limits.diagnostics import LimitDiagnoser, Verdict
from core.simulate.monte_carlo import MonteCarloSimulator, sigma_bound

logger = logging.getLogger(__name__)

SKIPPED = {'status': 'skipped'}

FINITE = "finite"
COFINITE = "cofinite"
BALANCED = "infinite and co-infinite"


@dataclass
class ExperimentManifest:
    """
    Attributes:
        name: Experiment name, used in artifact file names
        target: Target JSON: residue / periodic / finite / cofinite
        p_values: Densities to steer toward
        steps: Construction steps
        mode: paper | greedy
        n: Exact enumeration level
        trials: Monte Carlo trials
        seed: Monte Carlo seed
        output_dir: Directory for chain.json, trace.csv, report.json
        chain_file: Optional pre-built chain for the finite / cofinite bounds
        format_version: Manifest format version
    """

    name: str
    target: Dict[str, Any]
    p_values: List[Fraction] = field(default_factory=list)
    steps: int = 10000
    mode: ConstructionMode = ConstructionMode.PAPER
    n: int = 8
    trials: int = 100000
    seed: int = 20160314
    output_dir: Path = Path("results")
    chain_file: Optional[Path] = None
    format_version: int = artifacts.FORMAT_VERSION

    @classmethod
    def from_dict(cls, data: Dict[str, Any], params: Dict,
                  base_dir: Optional[Path] = None) -> 'ExperimentManifest':
        """Build and validate a manifest, filling gaps from the parameter file."""
        base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
        try:
            p_raw = data.get('p', data.get('p_values', []))
            if not isinstance(p_raw, list):
                p_raw = [p_raw]

            chain_file = data.get('chain_file')
            output_dir = Path(data.get('output_dir', 'results'))

            manifest = cls(
                name=str(data['name']),
                target=dict(data['target']),
                p_values=[parse_fraction(p) for p in p_raw],
                steps=int(data.get('steps', params['construction']['default_steps'])),
                mode=ConstructionMode(data.get('mode', params['construction']['default_mode'])),
                n=int(data.get('n', params['report']['enumeration_level'])),
                trials=int(data.get('trials', params['simulation']['default_trials'])),
                seed=int(data.get('seed', params['simulation']['default_seed'])),
                output_dir=output_dir if output_dir.is_absolute() else base_dir / output_dir,
                chain_file=None if chain_file is None else base_dir / chain_file,
                format_version=int(data.get('format_version', artifacts.FORMAT_VERSION)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ManifestError(f"Invalid manifest: {e}") from e

        manifest.validate()
        return manifest

    @classmethod
    def load(cls, path: Union[str, Path], params: Dict) -> 'ExperimentManifest':
        path = Path(path)
        return cls.from_dict(artifacts.load_manifest_data(path), params, base_dir=path.parent)

    def validate(self) -> None:
        if self.format_version != artifacts.FORMAT_VERSION:
            raise ManifestError(f"Manifest format version {self.format_version} is not supported")
        if any(not 0 <= p <= 1 for p in self.p_values):
            raise ManifestError(f"Every p must lie in [0, 1], got {[str(p) for p in self.p_values]}")
        if self.steps < 1 or self.n < 1 or self.trials < 1:
            raise ManifestError("steps, n and trials must be positive")
        if self.chain_file is not None and not self.chain_file.exists():
            raise ManifestError(f"Referenced chain file {self.chain_file} does not exist")
        classify_target(self.target)


@dataclass(frozen=True)
class CheckResult:
    name: str
    provenance: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> Dict:
        return {'name': self.name, 'provenance': self.provenance,
                'passed': self.passed, 'detail': self.detail}


@dataclass
class TheoremReport:
    """
    Desk-scale witness of the finite / cofinite / balanced trichotomy for one experiment.

    Sections that do not apply carry {"status": "skipped"}.
    """

    experiment: str
    target: str
    case: str
    constructions: List[Dict] = field(default_factory=list)
    finite_bound: Dict = field(default_factory=lambda: dict(SKIPPED))
    cofinite_bound: Dict = field(default_factory=lambda: dict(SKIPPED))
    uniformity: Dict = field(default_factory=lambda: dict(SKIPPED))
    checks: List[CheckResult] = field(default_factory=list)
    artifacts: Dict[str, str] = field(default_factory=dict)

    @property
    def exact_passed(self) -> bool:
        return all(c.passed for c in self.checks if c.provenance == 'exact')

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> Dict:
        return {
            'experiment': self.experiment,
            'target': self.target,
            'trichotomy': {'case': self.case, 'theorem_values': THEOREM_VALUES[self.case]},
            'constructions': self.constructions or [dict(SKIPPED)],
            'finite_bound': self.finite_bound,
            'cofinite_bound': self.cofinite_bound,
            'uniformity': self.uniformity,
            'checks': [c.to_dict() for c in self.checks],
            'exact_passed': self.exact_passed,
            'passed': self.passed,
            'artifacts': self.artifacts,
        }


THEOREM_VALUES = {
    FINITE: "{0}",
    COFINITE: "{1}",
    BALANCED: "[0,1]",
}


def classify_target(spec: Dict[str, Any]) -> Tuple[str, Union[TargetSet, FrozenSet[int]]]:
    """
    Trichotomy case of a target JSON object.

    Returns:
        (case, payload): payload is the TargetSet for the balanced case, the
        finite set for the finite case, the finite complement for the cofinite case
    """
    kind = spec.get('kind')
    try:
        if kind == 'finite':
            return FINITE, as_ball_set(spec['members'])
        if kind == 'cofinite':
            return COFINITE, as_ball_set(spec['complement'])
        target = target_from_json(spec)
    except (KeyError, TypeError, DomainError) as e:
        raise ManifestError(f"Invalid target {spec}: {e}") from e

    if target.is_finite:
        return FINITE, target.finite_members()
    if target.is_cofinite:
        return COFINITE, target.finite_members()
    return BALANCED, target


class SupertaskEngine:
    """
    Experiment runner over the chain, exact, simulation and limit modules.
    """

    def __init__(self, config_path: Optional[str] = None, workers: Optional[int] = None):
        """
        Initialize the engine.

        Args:
            config_path: Configuration directory or params file
            workers: Process count for enumeration and simulation (default from config)
        """
        self.params = load_params(config_path)
        version = self.params['report']['format_version']
        if version != artifacts.FORMAT_VERSION:
            raise ManifestError(f"Configured report format version {version} does not match "
                                f"the artifact codec (version {artifacts.FORMAT_VERSION})")
        if workers is None:
            workers = int(self.params['enumeration']['default_workers'])
        self.workers = workers

        self.constructor = ChainConstructor(self.params)
        self.simulator = MonteCarloSimulator(self.params, workers=workers)
        self.diagnoser = LimitDiagnoser(self.params)

        self.cap = self.params['enumeration']['cap']
        self.trace_tail = self.params['report']['trace_tail']
        self.bound_levels = list(self.params['report']['finite_bound_levels'])

        logger.info(f"Supertask engine initialized (cap n={self.cap}, {workers} worker(s))")

    # ── sections ──

    def construction_section(self, target: TargetSet, p: Fraction, steps: int,
                             mode: ConstructionMode, n: int, trials: int, seed: int,
                             report: TheoremReport,
                             output_dir: Optional[Path] = None, stem: str = "") -> Dict:
        """Construct, verify, simulate and diagnose one (A, p) pair."""
        p = parse_fraction(p)
        chain = self.constructor.build(target, p, steps=steps, mode=mode)
        trace = density_trace(chain, target)
        label = f"{target.describe()}, p={fraction_str(p)}"

        section: Dict[str, Any] = {
            'target': target_to_json(target),
            'p': fraction_str(p),
            'mode': mode.value,
            'steps': steps,
            'chain': self.constructor.summarize(chain, target, p, tail=self.trace_tail),
        }

        n = min(n, self.cap, len(chain))
        event = EventSpec(1, FinalInTarget(target))
        exact = density(chain, event, n, workers=self.workers, cap=self.cap)
        formula = Fraction(chain.count_in(target, n), n)
        section['exact'] = {**exact.to_dict(), 'formula': fraction_str(formula)}
        report.checks.append(CheckResult(
            f"x_{n}(R in A) equals |Z_{n} ∩ A|/{n} [{label}]", 'exact',
            exact.value == formula == trace[n - 1],
            f"{fraction_str(exact.value)} vs {fraction_str(formula)}"))

        constraint = verify_constraint(chain, event, n, cap=self.cap)
        report.checks.append(CheckResult(
            f"constraint identity for R in A at k=1, n={n} [{label}]", 'exact', constraint.passed))

        sim = self.simulator.run(chain, trials=trials, seed=seed, target=target, n=n)
        band = sigma_bound(float(exact.value), trials, self.simulator.fail_sigma)
        deviation = abs(sim.target_frequency - float(exact.value))
        section['monte_carlo'] = {
            'frequency': sim.target_frequency,
            'trials': trials,
            'seed': seed,
            'expected_band': sigma_bound(float(exact.value), trials, self.simulator.report_sigma),
            'provenance': 'sampled',
        }
        report.checks.append(CheckResult(
            f"Monte Carlo R in A within {self.simulator.fail_sigma:g} sigma [{label}]",
            'sampled', deviation <= band, f"deviation {deviation:.5f}, band {band:.5f}"))

        diagnostics = self.diagnoser.diagnose(trace, p=p, source=f"density trace, {label}")
        tol = self.diagnoser.tolerance_for(p)
        section['diagnostics'] = diagnostics.to_dict()
        report.checks.append(CheckResult(
            f"density trace converged to p within {fraction_str(tol)} [{label}]", 'diagnostic',
            diagnostics.within(p, tol), diagnostics.verdict.value))

        if output_dir is not None:
            tag = f"{stem}_p{p.numerator}-{p.denominator}"
            chain_path = artifacts.write_chain(chain, Path(output_dir) / f"{tag}_chain.json")
            trace_path = artifacts.write_trace(trace_frame(chain, target),
                                               Path(output_dir) / f"{tag}_trace.csv")
            report.artifacts[f"{tag}_chain"] = str(chain_path)
            report.artifacts[f"{tag}_trace"] = str(trace_path)

        logger.info(f"Construction section done: {label}, verdict {diagnostics.verdict.value}")
        return section

    def bound_section(self, members: FrozenSet[int], case: str, n: int,
                      report: TheoremReport, chain: Optional[ChainPrefix] = None) -> Dict:
        """x_n(R ∈ A) along increasing n for finite A or cofinite A (members = A^c)."""
        levels = sorted(self.bound_levels)
        chain = chain if chain is not None else ChainPrefix.natural(max(levels))
        levels = [lvl for lvl in levels if lvl <= len(chain)] or [len(chain)]
        bound_fn = finite_set_bound if case == FINITE else cofinite_set_bound

        rows = []
        for lvl in levels:
            value = bound_fn(chain, members, lvl)
            limit = Fraction(len(members), lvl)
            ok = value <= limit if case == FINITE else value >= 1 - limit
            rows.append({
                'n': lvl,
                'value': fraction_str(value),
                'bound': fraction_str(limit if case == FINITE else 1 - limit),
                'value_decimal': float(value),
                'within_bound': ok,
            })
            report.checks.append(CheckResult(
                f"{case} bound at n={lvl}", 'exact', ok, fraction_str(value)))

        n = min(n, self.cap, len(chain))
        enumerated = exact_final_in(chain, members, n, cap=self.cap)
        if case == COFINITE:
            enumerated = 1 - enumerated
        formula = bound_fn(chain, members, n)
        report.checks.append(CheckResult(
            f"{case} bound formula matches enumeration at n={n}", 'exact', enumerated == formula,
            f"{fraction_str(enumerated)} vs {fraction_str(formula)}"))

        return {
            'set' if case == FINITE else 'complement': sorted(members),
            'chain_length': len(chain),
            'levels': rows,
            'enumerated': {'n': n, 'value': fraction_str(enumerated), 'provenance': 'exact'},
            'trend': f"x_n(R in A) {'<=' if case == FINITE else '>='} "
                     f"{'' if case == FINITE else '1 - '}{len(members)}/n",
            'provenance': 'exact',
        }

    # ── experiments ──

    def run_experiment(self, manifest: ExperimentManifest, write: bool = True) -> TheoremReport:
        """
        Execute construct -> enumerate/simulate -> limits for one manifest.

        Args:
            manifest: Validated experiment manifest
            write: Write chain, trace and report files under manifest.output_dir

        Returns:
            TheoremReport; report.passed decides the CLI exit code
        """
        manifest.validate()
        case, payload = classify_target(manifest.target)
        logger.info(f"Running experiment {manifest.name} ({case} target)")

        output_dir = manifest.output_dir if write else None
        if case == BALANCED:
            description = payload.describe()
        else:
            description = f"{case} set with {'members' if case == FINITE else 'complement'} " \
                          f"{sorted(payload)}"
        report = TheoremReport(manifest.name, description, case)

        if case == BALANCED:
            for p in manifest.p_values:
                report.constructions.append(self.construction_section(
                    payload, p, manifest.steps, manifest.mode, manifest.n, manifest.trials,
                    manifest.seed, report, output_dir, stem=manifest.name))
        else:
            refusal = ConstructionRefused(refusal_message(_as_target(case, payload)))
            logger.warning(str(refusal))
            report.constructions.append({'status': 'refused', 'reason': str(refusal)})

            chain = artifacts.read_chain(manifest.chain_file) if manifest.chain_file else None
            section = self.bound_section(payload, case, manifest.n, report, chain)
            if case == FINITE:
                report.finite_bound = section
            else:
                report.cofinite_bound = section

        if write:
            path = artifacts.write_report(report.to_dict(),
                                          Path(manifest.output_dir) / f"{manifest.name}_report.json")
            report.artifacts['report'] = str(path)

        logger.info(f"Experiment {manifest.name}: {'PASS' if report.passed else 'FAIL'}")
        return report

    def residue_demo(self, modulus: int, p_values: Sequence[Union[Fraction, str, float]],
                     steps: Optional[int] = None, residues: Optional[Sequence[int]] = None,
                     n: Optional[int] = None, trials: Optional[int] = None,
                     seed: Optional[int] = None,
                     output_dir: Optional[Path] = None) -> TheoremReport:
        """
        Steer residue classes mod m to densities other than 1/m.

        Every attained p != 1/m is a probability function consistent with the
        supertask that breaks residue-class uniformity.
        """
        if modulus < 2:
            raise ManifestError(f"Modulus must be >= 2, got {modulus}")
        p_values = [parse_fraction(p) for p in p_values]
        if any(not 0 <= p <= 1 for p in p_values):
            raise ManifestError("Every p must lie in [0, 1]")

        residues = list(range(modulus)) if residues is None else list(residues)
        steps = self.constructor.default_steps if steps is None else steps
        n = self.params['report']['enumeration_level'] if n is None else n
        trials = self.simulator.default_trials if trials is None else trials
        seed = self.simulator.default_seed if seed is None else seed

        name = f"residue-demo-m{modulus}"
        report = TheoremReport(name, f"residue classes mod {modulus}", BALANCED)
        uniform = Fraction(1, modulus)
        attained = []

        for r in residues:
            target = ResidueClass(modulus, r)
            for p in p_values:
                section = self.construction_section(
                    target, p, steps, self.constructor.default_mode, n, trials, seed,
                    report, output_dir, stem=f"{name}_r{r}")
                report.constructions.append(section)
                converged = section['diagnostics']['verdict'] == Verdict.CONVERGED.value
                attained.append({
                    'residue': r,
                    'p': fraction_str(p),
                    'attained': converged,
                    'violates_uniformity': converged and p != uniform,
                })

        report.uniformity = {
            'uniform_value': fraction_str(uniform),
            'classes': attained,
            'violations': sum(a['violates_uniformity'] for a in attained),
            'provenance': 'diagnostic',
        }

        if output_dir is not None:
            path = artifacts.write_report(report.to_dict(), Path(output_dir) / f"{name}_report.json")
            report.artifacts['report'] = str(path)
        return report


def _as_target(case: str, members: FrozenSet[int]) -> TargetSet:
    """PeriodicWord with the same finite / cofinite shape, for messages."""
    top = max(members, default=0)
    bits = ''.join('1' if i in members else '0' for i in range(1, top + 1))
    if case == FINITE:
        return PeriodicWord(bits, '0')
    return PeriodicWord(''.join('0' if b == '1' else '1' for b in bits), '1')
