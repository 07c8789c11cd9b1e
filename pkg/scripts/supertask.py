#!/usr/bin/env python3
"""
Supertask Lab CLI
=================

Finite-scale experiments on the infinite-lottery supertask: construct
density-steering chains, verify the conditional-probability constraint by
enumeration, simulate, and diagnose density traces.

Usage:
    python scripts/supertask.py construct --target '{"kind":"residue","mod":2,"res":0}' --p 1/3 --steps 8 --mode greedy --out chain.json
    python scripts/supertask.py density --chain chain.json --event event.json --n 6
    python scripts/supertask.py verify --chain chain.json --event event.json --k 2 --n 6
    python scripts/supertask.py survival --chain chain.json --ball 3 --k 2 --n 6
    python scripts/supertask.py simulate --chain chain.json --trials 100000 --csv counts.csv
    python scripts/supertask.py limits --trace trace.csv --window 0.1 --tol 1/100
    python scripts/supertask.py run manifest.yaml
    python scripts/supertask.py residue-demo --m 3 --p 9/10 --steps 10000
    python scripts/supertask.py finite-bound --natural 1000000 --set 7
    python scripts/supertask.py crosscheck --chain chain.json --n 5 --trials 100000

Exit codes: 0 success, 1 failed exact or statistical check, 2 usage error.
"""

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from core.chain.events import EventSpec, event_to_json, target_to_json
from core.chain.prefix import ChainPrefix, as_ball_set
from core.config import fraction_str, parse_fraction
from core.construct.steering import trace_frame
from core.errors import SupertaskError, VerificationError
from core.exact.constraint import verify_constraint
from core.exact.enumerator import density, survival_density
from core.io import artifacts
from core.limits.diagnostics import diagnose, read_trace_csv
from core.simulate.monte_carlo import uniformity_test
from core.supertask_engine import (COFINITE, FINITE, THEOREM_VALUES, ExperimentManifest,
                                   SupertaskEngine, TheoremReport)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


def setup_logging(verbose: bool = False, log_file: Optional[str] = None):
    """Setup logging configuration."""
    level = logging.DEBUG if verbose else logging.INFO

    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def emit(payload: Dict[str, Any], report_path: Optional[str] = None):
    """Print a versioned JSON report, or write it when a path is given."""
    if report_path:
        artifacts.write_report(payload, report_path)
    else:
        print(json.dumps({'format_version': artifacts.FORMAT_VERSION, **payload}, indent=2))


def parse_balls(text: str) -> frozenset:
    return as_ball_set(int(x) for x in text.split(',') if x.strip())


def cmd_construct(engine: SupertaskEngine, args) -> int:
    target = artifacts.read_target(args.target)
    p = parse_fraction(args.p)
    chain = engine.constructor.build(target, p, steps=args.steps, mode=args.mode)

    artifacts.write_chain(chain, args.out)
    if args.trace:
        artifacts.write_trace(trace_frame(chain, target), args.trace)

    summary = engine.constructor.summarize(chain, target, p, tail=engine.trace_tail)
    emit({'command': 'construct', 'target': target_to_json(target), 'p': fraction_str(p),
          'chain_file': str(args.out), **summary}, args.report)
    return EXIT_OK


def cmd_density(engine: SupertaskEngine, args) -> int:
    chain = artifacts.read_chain(args.chain)
    event = artifacts.read_event(args.event)
    report = density(chain, event, args.n, workers=engine.workers, cap=engine.cap)
    emit({'command': 'density', 'event': event_to_json(event), **report.to_dict()}, args.report)
    return EXIT_OK


def cmd_verify(engine: SupertaskEngine, args) -> int:
    chain = artifacts.read_chain(args.chain)
    event = artifacts.read_event(args.event)
    if args.k is not None and args.k != event.level:
        event = EventSpec(args.k, event.predicate)

    check = verify_constraint(chain, event, args.n, cap=engine.cap)
    emit({'command': 'verify', **check.to_dict()}, args.report)
    if not check.passed:
        raise VerificationError(f"Constraint identity failed at k={check.k}, n={check.n}")
    return EXIT_OK


def cmd_survival(engine: SupertaskEngine, args) -> int:
    chain = artifacts.read_chain(args.chain)
    value = survival_density(chain, args.ball, args.k, args.n,
                             workers=engine.workers, cap=engine.cap)
    expected = Fraction(args.k, args.n)
    emit({'command': 'survival', 'ball': args.ball, 'k': args.k, 'n': args.n,
          'value': fraction_str(value), 'value_decimal': float(value),
          'expected': fraction_str(expected), 'provenance': 'exact'}, args.report)
    if value != expected:
        raise VerificationError(f"Survival density {value} differs from {expected}")
    return EXIT_OK


def cmd_simulate(engine: SupertaskEngine, args) -> int:
    chain = artifacts.read_chain(args.chain)
    target = artifacts.read_target(args.target) if args.target else None
    report = engine.simulator.run(chain, trials=args.trials, seed=args.seed,
                                  target=target, n=args.n)
    if args.csv:
        artifacts.write_counts(report.counts_frame(), args.csv)

    emit({'command': 'simulate', **report.to_dict(),
          'uniformity': engine.simulator.uniformity(report)}, args.report)
    return EXIT_OK


def cmd_limits(engine: SupertaskEngine, args) -> int:
    if not Path(args.trace).exists():
        raise SupertaskError(f"Trace file {args.trace} does not exist")
    seq = read_trace_csv(args.trace)
    window = args.window if args.window is not None else engine.diagnoser.window
    tol = args.tol if args.tol is not None else engine.diagnoser.tol
    result = diagnose(seq, window=window, tol=tol, source=str(args.trace))
    emit({'command': 'limits', **result.to_dict()}, args.report)
    return EXIT_OK


def cmd_run(engine: SupertaskEngine, args) -> int:
    manifest = ExperimentManifest.load(args.manifest, engine.params)
    if args.output_dir:
        manifest.output_dir = Path(args.output_dir)

    report = engine.run_experiment(manifest)
    print_summary(report)
    if not report.exact_passed:
        raise VerificationError(f"Exact checks failed in experiment {manifest.name}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_residue_demo(engine: SupertaskEngine, args) -> int:
    residues = [int(r) for r in args.classes.split(',')] if args.classes else None
    report = engine.residue_demo(args.m, args.p, steps=args.steps, residues=residues,
                                 trials=args.trials, seed=args.seed,
                                 output_dir=Path(args.output_dir))
    print_summary(report)
    if not report.exact_passed:
        raise VerificationError(f"Exact checks failed in residue demo mod {args.m}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_finite_bound(engine: SupertaskEngine, args) -> int:
    if args.chain:
        chain = artifacts.read_chain(args.chain)
    else:
        chain = ChainPrefix.natural(args.natural)

    case, members = (FINITE, parse_balls(args.set)) if args.set else \
        (COFINITE, parse_balls(args.complement))

    report = TheoremReport("finite-bound", f"{case} set", case)
    n = args.n or engine.params['report']['enumeration_level']
    section = engine.bound_section(members, case, n, report, chain)

    emit({'command': 'finite-bound',
          'trichotomy': {'case': case, 'theorem_values': THEOREM_VALUES[case]},
          f"{case}_bound": section,
          'checks': [c.to_dict() for c in report.checks],
          'passed': report.passed}, args.report)
    if not report.passed:
        raise VerificationError(f"{case} bound violated")
    return EXIT_OK


def cmd_crosscheck(engine: SupertaskEngine, args) -> int:
    chain = artifacts.read_chain(args.chain)
    record = engine.simulator.crosscheck(chain, args.n, trials=args.trials, seed=args.seed)
    emit({'command': 'crosscheck', **record.to_dict(),
          'uniformity': uniformity_test(record.report, engine.simulator.chi_square_quantile)},
         args.report)
    return EXIT_OK if record.passed else EXIT_CHECK_FAILED


def print_summary(report):
    """Print experiment results in formatted output."""
    print("\n" + "=" * 70)
    print(f"  {report.experiment.upper()}")
    print("=" * 70)
    print(f"\nTarget: {report.target}")
    print(f"Trichotomy case: {report.case} -> values {THEOREM_VALUES[report.case]}")

    for section in report.constructions:
        if 'chain' not in section:
            print(f"\nConstruction {section.get('status')}: {section.get('reason', '')}")
            continue
        diagnostics = section['diagnostics']
        print(f"\np = {section['p']}  ({section['mode']}, {section['steps']} steps)")
        print(f"  Final density:     {section['chain']['final_density_decimal']:.5f}")
        print(f"  Exact x_n(R in A): {section['exact']['value']} (n={section['exact']['n']})")
        print(f"  Monte Carlo:       {section['monte_carlo']['frequency']:.5f}")
        print(f"  Verdict:           {diagnostics['verdict']} {diagnostics['value'] or ''}")

    print("\nChecks:")
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"  [{check.provenance:<10}] {status}  {check.name}")

    print(f"\n{'ALL CHECKS PASSED' if report.passed else 'SOME CHECKS FAILED'}")
    for name, path in report.artifacts.items():
        print(f"  {name}: {path}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Finite-scale infinite-lottery supertask lab')
    parser.add_argument('--config-path', type=str, default=None,
                        help='Path to configuration directory or params file')
    parser.add_argument('--workers', type=int, default=None,
                        help='Worker processes for enumeration and simulation')
    parser.add_argument('--log-file', type=str, default=None,
                        help='Also write logs to this file')
    parser.add_argument('--verbose', '-v', action='store_true',
                        help='Verbose logging')

    sub = parser.add_subparsers(dest='command', required=True)

    def with_report(p):
        p.add_argument('--report', type=str, default=None,
                       help='Write the JSON report here instead of stdout')
        return p

    p = with_report(sub.add_parser('construct', help='Build a density-steering chain'))
    p.add_argument('--target', required=True, help='Target JSON (inline or file)')
    p.add_argument('--p', required=True, help='Target density, e.g. 1/3')
    p.add_argument('--steps', type=int, default=None)
    p.add_argument('--mode', choices=['paper', 'square', 'greedy'], default=None)
    p.add_argument('--out', required=True, help='chain.json path')
    p.add_argument('--trace', default=None, help='Optional trace.csv path')
    p.set_defaults(handler=cmd_construct)

    p = with_report(sub.add_parser('density', help='Exact x_n(S) by enumeration'))
    p.add_argument('--chain', required=True)
    p.add_argument('--event', required=True, help='Event JSON (inline or file)')
    p.add_argument('--n', type=int, required=True)
    p.set_defaults(handler=cmd_density)

    p = with_report(sub.add_parser('verify', help='Check the constraint identity'))
    p.add_argument('--chain', required=True)
    p.add_argument('--event', required=True)
    p.add_argument('--k', type=int, default=None, help='Event level (defaults to the JSON level)')
    p.add_argument('--n', type=int, required=True)
    p.set_defaults(handler=cmd_verify)

    p = with_report(sub.add_parser('survival', help='Exact x_n(a in B_k)'))
    p.add_argument('--chain', required=True)
    p.add_argument('--ball', type=int, required=True)
    p.add_argument('--k', type=int, required=True)
    p.add_argument('--n', type=int, required=True)
    p.set_defaults(handler=cmd_survival)

    p = with_report(sub.add_parser('simulate', help='Monte Carlo final-ball counts'))
    p.add_argument('--chain', required=True)
    p.add_argument('--trials', type=int, default=None)
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--target', default=None)
    p.add_argument('--n', type=int, default=None, help='Truncation level (defaults to chain length)')
    p.add_argument('--csv', default=None, help='Per-ball counts CSV path')
    p.set_defaults(handler=cmd_simulate)

    p = with_report(sub.add_parser('limits', help='Diagnose a density trace'))
    p.add_argument('--trace', required=True, help='trace.csv path')
    p.add_argument('--window', default=None)
    p.add_argument('--tol', default=None)
    p.set_defaults(handler=cmd_limits)

    p = sub.add_parser('run', help='Run an experiment manifest')
    p.add_argument('manifest')
    p.add_argument('--output-dir', default=None)
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser('residue-demo', help='Steer residue classes away from 1/m')
    p.add_argument('--m', type=int, required=True)
    p.add_argument('--p', nargs='+', required=True)
    p.add_argument('--steps', type=int, default=None)
    p.add_argument('--classes', default=None, help='Comma-separated residues (default: all)')
    p.add_argument('--trials', type=int, default=None)
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--output-dir', default='results')
    p.set_defaults(handler=cmd_residue_demo)

    p = with_report(sub.add_parser('finite-bound', help='Finite / cofinite bound report'))
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument('--chain')
    source.add_argument('--natural', type=int)
    members = p.add_mutually_exclusive_group(required=True)
    members.add_argument('--set', help='Finite A, e.g. 7,9')
    members.add_argument('--complement', help='Finite complement of a cofinite A')
    p.add_argument('--n', type=int, default=None, help='Enumeration cross-check level')
    p.set_defaults(handler=cmd_finite_bound)

    p = with_report(sub.add_parser('crosscheck', help='Monte Carlo against exact law'))
    p.add_argument('--chain', required=True)
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--trials', type=int, default=None)
    p.add_argument('--seed', type=int, default=None)
    p.set_defaults(handler=cmd_crosscheck)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main function."""
    parser = build_parser()
    args = parser.parse_args(argv)

    setup_logging(args.verbose, args.log_file)
    logger = logging.getLogger(__name__)

    try:
        engine = SupertaskEngine(args.config_path, workers=args.workers)
        return args.handler(engine, args)

    except VerificationError as e:
        logger.error(f"Verification failed: {e}")
        return EXIT_CHECK_FAILED
    except (SupertaskError, ValueError) as e:
        logger.error(f"Usage error: {e}")
        return EXIT_USAGE
    except KeyboardInterrupt:
        logger.warning("Interrupted by user")
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
