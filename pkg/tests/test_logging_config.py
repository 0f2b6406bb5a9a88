"""
Tests for structured logging setup
"""

import json
import logging

import numpy as np
import pytest

from disco_scheduling_system.shared.logging_config import (setup_logging, get_default_logging_config,
                                                           PerformanceLogger, log_with_context, STAGES)


@pytest.fixture
def log_dir(tmp_path):
    config = get_default_logging_config()
    config['log_dir'] = str(tmp_path)
    config['console']['enabled'] = False
    setup_logging(config)
    yield tmp_path
    for name in [None] + [f"stage.{stage}" for stage in STAGES]:
        logger = logging.getLogger(name)
        for handler in list(logger.handlers):
            handler.close()
            logger.removeHandler(handler)


def _records(path):
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


def test_stage_logger_writes_its_own_file(log_dir):
    log_with_context(logging.getLogger("stage.solver"), logging.WARNING, "gap not closed", gap=np.float64(0.5))
    for handler in logging.getLogger("stage.solver").handlers + logging.getLogger().handlers:
        handler.flush()

    stage_records = _records(log_dir / "solver.log")
    assert stage_records[-1]['message'] == "gap not closed"
    assert stage_records[-1]['stage'] == "solver"
    assert stage_records[-1]['gap'] == 0.5
    assert stage_records[-1]['level'] == "WARNING"

    # propagates to the main file as well
    messages = [r['message'] for r in _records(log_dir / "disco_scheduling.log")]
    assert "gap not closed" in messages


def test_performance_records_carry_fields(log_dir):
    PerformanceLogger().log_solve_result("toy", "optimal", objective=1.5, nodes=3)
    PerformanceLogger().log_big_m_warning("MG1_xup_t1", "dual", 900.0, 900.0)
    for handler in logging.getLogger().handlers:
        handler.flush()

    records = [r for r in _records(log_dir / "disco_scheduling.log") if 'metric_type' in r]
    solve, big_m = records[-2], records[-1]
    assert solve['metric_type'] == 'solve_result'
    assert solve['objective'] == 1.5
    assert solve['nodes'] == 3
    assert 'stage' not in solve
    assert big_m['metric_type'] == 'big_m_warning'
    assert big_m['pair'] == "MG1_xup_t1"
