#!/usr/bin/env python3
"""
Disco Scheduling System CLI
Command-line interface for running, comparing and exporting scheduling cases
"""

import asyncio
import argparse
import os
import sys
from typing import Dict, Any, Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.dirname(__file__))))

from disco_scheduling_system.analysis.report import (CaseReport, compare_cases, emit_plot_data,
                                                     emit_comparison, reference_lines)
from disco_scheduling_system.orchestrator.case_runner import CaseRunner
from disco_scheduling_system.shared.config import load_config
from disco_scheduling_system.shared.exceptions import SchedulingError
from disco_scheduling_system.shared.logging_config import setup_logging
from disco_scheduling_system.shared.models import SOLVER_MODES

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_LIMIT = 2
EXIT_INTERNAL = 3


class DiscoCLI:
    """Command-line interface for the scheduling system"""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = load_config(getattr(args, 'config', None))
        self._apply_tolerances()
        setup_logging(self.config['logging'])
        self.output_dir = getattr(args, 'output', None) or self.config['scheduler'].get('output_dir', 'output')

    def _apply_tolerances(self):
        tolerances = self.config['scheduler'].setdefault('tolerances', {})
        for key in ('feasibility', 'integrality', 'import', 'report', 'bilevel'):
            value = getattr(self.args, f"{key}_tol", None)
            if value is not None:
                tolerances[key] = value

    def overrides(self, **extra) -> Dict[str, Any]:
        """Case-config overrides taken from the command-line flags"""
        args = self.args
        overrides = {
            'solver_mode': getattr(args, 'solver', None),
            'mip_gap': getattr(args, 'mip_gap', None),
            'node_limit': getattr(args, 'node_limit', None),
            'time_limit': getattr(args, 'time_limit', None),
            'big_m_primal': getattr(args, 'big_m_primal', None),
            'big_m_dual': getattr(args, 'big_m_dual', None),
            'pwl_segments': getattr(args, 'pwl_segments', None),
            'horizon': getattr(args, 'horizon', None),
            'flexibility_enabled': getattr(args, 'flexibility', None),
            'scenario_mode': getattr(args, 'scenario', None),
            'scenario_file': os.path.abspath(args.scenario_file) if getattr(args, 'scenario_file', None) else None,
            'normalize_probabilities': True if getattr(args, 'normalize', False) else None,
            'report_scenario': getattr(args, 'report_scenario', None),
            'initial_purchase': getattr(args, 'initial_purchase', None)
        }
        overrides.update(extra)
        return {k: v for k, v in overrides.items() if v is not None}

    def _print_report(self, report: CaseReport, case: str):
        print(f"📊 Case {report.name} ({'with' if report.flexibility_enabled else 'without'} flexibility)")
        print("=" * 50)
        print(f"  Status: {report.status}")
        print(f"  Disco profit: {report.profit:.2f} $")
        print(f"  WEM purchase: {report.total_purchase:.2f} MWh")
        print(f"  Max ramp up/down: {report.ramp.max_up:.2f} / {report.ramp.max_down:.2f} MW/h")
        print(f"  Disco IL / DG: {report.disco_il_total:.2f} / {report.disco_dg_total:.2f} MW")
        for mg_id, cost in report.mg_costs.items():
            print(f"  {mg_id} operation cost: {cost:.2f} $")
        print(f"  LEM price: {', '.join(f'{p:.1f}' for p in report.lem_price)}")
        lines = reference_lines(report, case)
        if lines:
            print("📎 Reference figures (orientation only):")
            for line in lines:
                print(f"  {line}")
        for warning in report.warnings:
            print(f"⚠️  {warning}")

    def _audit_path(self, case: Optional[str] = None) -> Optional[str]:
        """--kkt-audit target, suffixed with the case name when several cases run"""
        path = getattr(self.args, 'kkt_audit', None)
        if path and case:
            root, ext = os.path.splitext(path)
            return f"{root}_{case}{ext}"
        return path

    def _run(self, runner: CaseRunner, overrides: Dict[str, Any], solution: Optional[str] = None,
             kkt_audit: Optional[str] = None) -> CaseReport:
        return runner.run(self.args.case, overrides, self.args.seed, solution, self.output_dir, kkt_audit)

    async def _run_cases(self, cases: Dict[str, Dict[str, Any]]) -> Dict[str, CaseReport]:
        """Solve independent cases, on up to scheduler.workers threads"""
        workers = max(1, int(self.config['scheduler'].get('workers', 1)))
        if workers == 1:
            return {name: self._run(CaseRunner(self.config), overrides, kkt_audit=self._audit_path(name))
                    for name, overrides in cases.items()}

        slots = asyncio.Semaphore(workers)

        async def solve(name: str) -> CaseReport:
            async with slots:
                return await asyncio.to_thread(self._run, CaseRunner(self.config), cases[name], None,
                                               self._audit_path(name))

        reports = await asyncio.gather(*(solve(name) for name in cases))
        return dict(zip(cases, reports))

    async def run_case(self):
        """Run a single case and write its report and figure data"""
        try:
            print("🚀 Running scheduling case...")
            runner = CaseRunner(self.config)
            report = self._run(runner, self.overrides(), getattr(self.args, 'solution', None), self._audit_path())
            os.makedirs(self.output_dir, exist_ok=True)
            report.save(os.path.join(self.output_dir, 'report.json'))
            emit_plot_data(report, self.output_dir)
            self._print_report(report, 'flex' if report.flexibility_enabled else 'noflex')
            print(f"✅ Report written to {self.output_dir}")
        except SchedulingError as e:
            print(f"❌ {e}")
            return e.exit_code
        return EXIT_OK

    async def compare(self):
        """Solve the case without and with flexibility side by side"""
        try:
            print("⚖️  Comparing cases without and with flexibility...")
            reports = await self._run_cases({'noflex': self.overrides(flexibility_enabled=False),
                                             'flex': self.overrides(flexibility_enabled=True)})
            noflex, flex = reports['noflex'], reports['flex']
            table = compare_cases(noflex, flex)
            for name, report in (('noflex', noflex), ('flex', flex)):
                outdir = os.path.join(self.output_dir, name)
                os.makedirs(outdir, exist_ok=True)
                report.save(os.path.join(outdir, 'report.json'))
                emit_plot_data(report, outdir)
                self._print_report(report, name)
            emit_comparison(table, self.output_dir)

            print("📈 Differences (flex - noflex):")
            for row in table.rows:
                print(f"  {row['metric']}: {row['noflex']:.2f} -> {row['flex']:.2f} ({row['delta']:+.2f})")
            print(f"💸 Lost revenue: {table.lost_revenue:.2f} $")
            reference = noflex.reference.get('lost_revenue')
            if reference is not None:
                print(f"📎 Reference lost revenue: {reference}")
            print(f"✅ Comparison written to {self.output_dir}")
        except SchedulingError as e:
            print(f"❌ {e}")
            return e.exit_code
        return EXIT_OK

    async def export_model(self):
        """Write the compiled MILP in LP format for an external solver"""
        try:
            runner = CaseRunner(self.config)
            compiled = runner.compile(runner.load(self.args.case, self.overrides(), self.args.seed))
            path = runner.export(compiled, self.output_dir)
            if self._audit_path():
                runner.write_kkt_audit(compiled, self._audit_path())
            stats = compiled.model.statistics()
            print(f"📦 Exported {compiled.model.name}: {stats['rows']} rows, {stats['columns']} columns, "
                  f"{stats['binaries']} binaries")
            print(f"✅ Model written to {path}")
        except SchedulingError as e:
            print(f"❌ {e}")
            return e.exit_code
        return EXIT_OK

    async def import_solution(self):
        """Check an external solution against the compiled model and report it"""
        try:
            if not os.path.exists(self.args.solution):
                print(f"❌ Solution file not found: {self.args.solution}")
                return EXIT_INPUT
            print(f"📥 Importing solution {self.args.solution}")
            runner = CaseRunner(self.config)
            report = self._run(runner, self.overrides(solver_mode="export"), self.args.solution)
            os.makedirs(self.output_dir, exist_ok=True)
            report.save(os.path.join(self.output_dir, 'report.json'))
            self._print_report(report, 'flex' if report.flexibility_enabled else 'noflex')
            print("✅ Solution accepted")
        except SchedulingError as e:
            print(f"❌ {e}")
            return e.exit_code
        return EXIT_OK

    async def emit_plots(self):
        """Regenerate the figure-data CSVs from a saved report"""
        try:
            if not os.path.exists(self.args.report):
                print(f"❌ Report file not found: {self.args.report}")
                return EXIT_INPUT
            report = CaseReport.load(self.args.report)
            paths = emit_plot_data(report, self.output_dir)
            for path in paths:
                print(f"  - {path}")
            print(f"✅ {len(paths)} files written")
        except (OSError, ValueError, KeyError) as e:
            print(f"❌ Cannot emit figure data: {e}")
            return EXIT_INPUT
        return EXIT_OK


def _add_case_arguments(parser: argparse.ArgumentParser):
    parser.add_argument('--case', help='Case directory (defaults to the bundled 33-bus case)')
    parser.add_argument('--seed', type=int, help='Use a seeded random toy case instead of a case directory')
    parser.add_argument('--solver', choices=SOLVER_MODES, help='Solver backend')
    parser.add_argument('--mip-gap', type=float, help='Relative optimality gap')
    parser.add_argument('--node-limit', type=int, help='Branch-and-bound node limit')
    parser.add_argument('--time-limit', type=float, help='Solver time limit in seconds')
    parser.add_argument('--big-m-primal', type=float, help='Big-M for complementarity slacks')
    parser.add_argument('--big-m-dual', type=float, help='Big-M for lower-level duals')
    parser.add_argument('--pwl-segments', type=int, help='Segments of the squared voltage/current approximation')
    parser.add_argument('--horizon', type=int, help='Number of hours')
    parser.add_argument('--flexibility', action=argparse.BooleanOptionalAction, default=None,
                        help='Enable the purchase ramp penalty')
    parser.add_argument('--initial-purchase', type=float, help='WEM purchase before hour 1 (MW)')
    parser.add_argument('--scenario', choices=['generative', 'file', 'single'], help='Scenario mode')
    parser.add_argument('--scenario-file', help='Scenario CSV for --scenario file')
    parser.add_argument('--normalize', action='store_true', help='Rescale file probabilities that do not sum to 1')
    parser.add_argument('--report-scenario', type=int, help='Scenario (1-based) for figure data')
    parser.add_argument('--kkt-audit', help='Write the microgrid optimality systems to this file')
    for key in ('feasibility', 'integrality', 'import', 'report', 'bilevel'):
        parser.add_argument(f'--{key}-tol', type=float, help=f'{key.capitalize()} tolerance')
    parser.add_argument('--output', help='Output directory')
    parser.add_argument('--config', default=None, help='Configuration file path')


def main(argv=None):
    """Main CLI entry point"""
    parser = argparse.ArgumentParser(description="Disco Scheduling System CLI")
    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    # Run command
    run_parser = subparsers.add_parser('run', help='Solve one case and write its report')
    _add_case_arguments(run_parser)
    run_parser.add_argument('--solution', help='External solution file (with --solver export)')

    # Compare command
    compare_parser = subparsers.add_parser('compare', help='Solve without and with flexibility')
    _add_case_arguments(compare_parser)

    # Export command
    export_parser = subparsers.add_parser('export-model', help='Write the MILP in LP format')
    _add_case_arguments(export_parser)

    # Import command
    import_parser = subparsers.add_parser('import-solution', help='Check and report an external solution')
    _add_case_arguments(import_parser)
    import_parser.add_argument('solution', help='Solution file with one "name value" per line')

    # Plot data command
    plots_parser = subparsers.add_parser('emit-plots', help='Write figure-data CSVs from a saved report')
    plots_parser.add_argument('report', help='Path to report.json')
    plots_parser.add_argument('--output', help='Output directory')
    plots_parser.add_argument('--config', default=None, help='Configuration file path')

    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_INPUT

    try:
        cli = DiscoCLI(args)
        if args.command == 'run':
            return asyncio.run(cli.run_case())
        elif args.command == 'compare':
            return asyncio.run(cli.compare())
        elif args.command == 'export-model':
            return asyncio.run(cli.export_model())
        elif args.command == 'import-solution':
            return asyncio.run(cli.import_solution())
        elif args.command == 'emit-plots':
            return asyncio.run(cli.emit_plots())
        else:
            print(f"❌ Unknown command: {args.command}")
            return EXIT_INPUT

    except KeyboardInterrupt:
        print("\n🛑 Operation cancelled by user")
        return EXIT_OK
    except Exception as e:
        print(f"❌ Unexpected error: {e}")
        return EXIT_INTERNAL


if __name__ == '__main__':
    sys.exit(main())
