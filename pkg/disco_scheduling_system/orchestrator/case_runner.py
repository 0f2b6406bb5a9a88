"""
Case runner - drives one case through load, scenarios, compile, solve and report
"""

import logging
import os
import time
from contextlib import contextmanager
from typing import Dict, Any, Optional

import numpy as np

from ..analysis.report import CaseReport, build_report
from ..bilevel.compiler import CompiledModel, assemble_milp, extract_solution, check_big_m
from ..bilevel.kkt import kkt_audit_lines
from ..data.loader import CaseData, load_case, load_reference
from ..data.synthetic import random_case
from ..milp.branch_and_bound import SolveOptions, solve_milp
from ..milp.lp_format import export_model, import_solution
from ..milp.model import Solution, INFEASIBLE, UNBOUNDED, LIMIT, verify_solution
from ..scenarios.engine import build_scenarios
from ..shared.config import load_config
from ..shared.exceptions import (StageError, SolverError, SolverLimitError,
                                 SolutionImportError, InvariantViolation)
from ..shared.logging_config import PerformanceLogger, log_with_context


class CaseRunner:
    """Runs cases with the solver settings of the system configuration"""

    def __init__(self, config: Optional[Dict[str, Any]] = None, config_path: Optional[str] = None):
        self.config = config if config is not None else load_config(config_path)
        self.settings = self.config.get('scheduler', {})
        self.tolerances = self.settings.get('tolerances', {})
        self.logger = logging.getLogger("orchestrator")
        self.perf_logger = PerformanceLogger()
        self.stage_times: Dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        """Time a stage and wrap anything it raises with the stage name"""
        stage_logger = logging.getLogger(f"stage.{name}")
        started = time.time()
        success = False
        try:
            yield stage_logger
            success = True
        except StageError:
            raise
        except Exception as e:
            stage_logger.error(f"Stage {name} failed: {e}")
            raise StageError(name, e) from e
        finally:
            elapsed = time.time() - started
            self.stage_times[name] = elapsed
            self.perf_logger.log_stage_time(name, elapsed, success)

    def solve_options(self, case_config) -> SolveOptions:
        backend = "highs" if case_config.solver_mode == "highs" else "embedded"
        return SolveOptions(
            backend=backend,
            mip_gap=case_config.mip_gap,
            absolute_gap=self.settings.get('absolute_gap', 1e-6),
            node_limit=case_config.node_limit,
            time_limit=case_config.time_limit,
            integrality_tolerance=self.tolerances.get('integrality', 1e-6)
        )

    def load(self, case_dir: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None,
             seed: Optional[int] = None) -> CaseData:
        with self.stage("loader") as log:
            if seed is not None:
                network, microgrids, market, config = random_case(seed)
                if overrides:
                    config = config.with_overrides(**overrides)
                log.info(f"Generated random case {config.name}")
                return network, microgrids, market, config
            case_dir = case_dir or self.settings.get('case_dir')
            case = load_case(case_dir, overrides)
            log.info(f"Loaded case {case[3].name} from {case_dir}")
            return case

    def compile(self, case: CaseData) -> CompiledModel:
        network, microgrids, market, config = case
        with self.stage("scenarios") as log:
            scenarios = build_scenarios(config)
            log.info(f"{len(scenarios)} scenarios over {scenarios.horizon} hours")
        with self.stage("compiler"):
            return assemble_milp(network, microgrids, scenarios, market, config)

    def solve(self, compiled: CompiledModel, solution_file: Optional[str] = None,
              output_dir: Optional[str] = None) -> Solution:
        """Solve in-process, or in export mode write the model and read back an external solution"""
        config = compiled.config
        model = compiled.model
        with self.stage("solver") as log:
            if config.solver_mode == "export":
                if solution_file is None:
                    path = self.export(compiled, output_dir)
                    raise SolutionImportError(f"model written to {path}; solve it externally and "
                                              "pass the solution file")
                solution = import_solution(model, solution_file, self.tolerances.get('import', 1e-5))
            else:
                solution = solve_milp(model, self.solve_options(config))

            self.perf_logger.log_solve_result(
                model.name, solution.status,
                objective=float(solution.objective) if solution.has_values else None,
                nodes=solution.stats.get('nodes', 0), iterations=solution.stats.get('iterations', 0),
                wall_time=solution.stats.get('wall_time', 0.0), gap=solution.stats.get('gap'))

            if solution.status in (INFEASIBLE, UNBOUNDED):
                raise SolverError(f"model {model.name} is {solution.status}")
            if not solution.has_values:
                raise SolverLimitError(f"model {model.name} hit its limit without a feasible schedule")
            if solution.status == LIMIT:
                solution.warnings.append(f"limit reached with gap {solution.stats.get('gap')}")
                log.warning(f"Solve of {model.name} stopped at its limit; reporting the incumbent")

            worst, violation = verify_solution(model, solution.values,
                                               self.tolerances.get('feasibility', 1e-5),
                                               self.tolerances.get('integrality', 1e-6))
            if worst is not None:
                raise InvariantViolation(f"solver returned a point violating '{worst}' by {violation:.3e}")

            solution.warnings.extend(check_big_m(compiled, solution))
            self.verify_bilevel(compiled, solution)
            return solution

    def verify_bilevel(self, compiled: CompiledModel, solution: Solution):
        """Re-solve every microgrid LP at the chosen prices; each must already be optimal"""
        tolerance = self.tolerances.get('bilevel', 1e-5)
        x = np.asarray(solution.values, dtype=float)
        prices = x[compiled.first_stage.price]
        for mg_id, block in compiled.blocks.items():
            primal = x[block.primal]
            scheduled = block.lp.objective(primal, prices)
            optimum, _ = block.lp.solve(prices)
            if scheduled - optimum > tolerance * max(1.0, abs(optimum)):
                raise InvariantViolation(f"{mg_id} could lower its cost from {scheduled:.6f} to {optimum:.6f} "
                                         "at the scheduled prices")

    def write_kkt_audit(self, compiled: CompiledModel, path: str) -> str:
        """Dump every microgrid's optimality system, one line per stationarity row and pair"""
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w') as f:
            for block in compiled.blocks.values():
                for line in kkt_audit_lines(block.kkt, block.encoding):
                    f.write(line + "\n")
        self.logger.info(f"Wrote KKT audit of {len(compiled.blocks)} microgrids to {path}")
        return path

    def export(self, compiled: CompiledModel, output_dir: Optional[str] = None) -> str:
        output_dir = output_dir or self.settings.get('output_dir', 'output')
        os.makedirs(output_dir, exist_ok=True)
        path = export_model(compiled.model, os.path.join(output_dir, f"{compiled.model.name}.lp"))
        self.logger.info(f"Exported {compiled.model.name} to {path}")
        return path

    def report(self, compiled: CompiledModel, solution: Solution,
               reference: Optional[Dict[str, Any]] = None) -> CaseReport:
        with self.stage("report"):
            schedule = extract_solution(compiled, solution)
            return build_report(compiled, schedule, reference,
                                tolerance=self.tolerances.get('report', 1e-4))

    def run(self, case_dir: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None,
            seed: Optional[int] = None, solution_file: Optional[str] = None,
            output_dir: Optional[str] = None, kkt_audit: Optional[str] = None) -> CaseReport:
        case = self.load(case_dir, overrides, seed)
        compiled = self.compile(case)
        if kkt_audit:
            self.write_kkt_audit(compiled, kkt_audit)
        solution = self.solve(compiled, solution_file, output_dir)
        reference = load_reference(case_dir or self.settings.get('case_dir')) if seed is None else {}
        report = self.report(compiled, solution, reference)
        total = sum(self.stage_times.values())
        log_with_context(self.logger, logging.INFO,
                         f"Case {compiled.config.name} finished in {total:.2f}s",
                         case=compiled.config.name, profit=report.profit,
                         stage_seconds=dict(self.stage_times))
        return report


def run_case(case_dir: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None,
             seed: Optional[int] = None, config: Optional[Dict[str, Any]] = None,
             solution_file: Optional[str] = None, output_dir: Optional[str] = None,
             kkt_audit: Optional[str] = None) -> CaseReport:
    """Run one case end to end; errors come out as StageError naming the failing stage"""
    return CaseRunner(config).run(case_dir, overrides, seed, solution_file, output_dir, kkt_audit)

