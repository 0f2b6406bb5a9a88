"""
Logging configuration for the scheduling system

The root logger gets a console handler and a rotating JSON file; every
pipeline stage (``stage.<name>`` loggers) additionally writes its own file.
Structured fields travel on the record as ``extra_fields``.
"""

import logging
import logging.handlers
import json
import os
from datetime import datetime, timezone
from typing import Dict, Any, Optional

STAGES = ['loader', 'scenarios', 'compiler', 'solver', 'report']
PLAIN_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class JSONFormatter(logging.Formatter):
    """One JSON object per record, with extra_fields merged in"""

    def format(self, record):
        entry = {
            'timestamp': datetime.fromtimestamp(record.created, timezone.utc).isoformat(),
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
            'location': f"{record.module}.{record.funcName}:{record.lineno}"
        }
        if record.name.startswith('stage.'):
            entry['stage'] = record.name.split('.', 1)[1]
        if record.exc_info:
            entry['exception'] = self.formatException(record.exc_info)
        entry.update(getattr(record, 'extra_fields', {}))
        # numpy scalars and paths fall back to str
        return json.dumps(entry, default=str)


def _make_handler(section: Dict[str, Any], handler: logging.Handler, json_default: bool) -> logging.Handler:
    handler.setLevel(getattr(logging, section.get('level', 'INFO')))
    if section.get('json_format', json_default):
        handler.setFormatter(JSONFormatter())
    else:
        handler.setFormatter(logging.Formatter(section.get('format', PLAIN_FORMAT)))
    return handler


def setup_logging(config: Optional[Dict[str, Any]] = None):
    """Install console, file and per-stage handlers from the logging section"""
    config = config or get_default_logging_config()
    log_dir = config.get('log_dir', 'logs')
    console = config.get('console', {})
    logfile = config.get('file', {})
    stage_files = config.get('stage_files', {}).get('enabled', True)

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, config.get('level', 'INFO')))
    root_logger.handlers.clear()

    if logfile.get('enabled', True) or stage_files:
        os.makedirs(log_dir, exist_ok=True)

    if console.get('enabled', True):
        root_logger.addHandler(_make_handler(console, logging.StreamHandler(), json_default=False))

    if logfile.get('enabled', True):
        rotating = logging.handlers.RotatingFileHandler(
            os.path.join(log_dir, logfile.get('filename', 'disco_scheduling.log')),
            maxBytes=logfile.get('max_bytes', 10 * 1024 * 1024),
            backupCount=logfile.get('backup_count', 5))
        root_logger.addHandler(_make_handler({'level': 'DEBUG', **logfile}, rotating, json_default=True))

    if stage_files:
        for stage in STAGES:
            stage_logger = logging.getLogger(f"stage.{stage}")
            stage_logger.handlers.clear()
            rotating = logging.handlers.RotatingFileHandler(
                os.path.join(log_dir, f"{stage}.log"), maxBytes=5 * 1024 * 1024, backupCount=3)
            stage_logger.addHandler(_make_handler({'level': 'DEBUG'}, rotating, json_default=True))

    logging.info(f"Logging initialized in {log_dir}")


def get_default_logging_config() -> Dict[str, Any]:
    """Get default logging configuration"""
    return {
        'level': 'INFO',
        'log_dir': 'logs',
        'console': {'enabled': True, 'level': 'INFO', 'json_format': False, 'format': PLAIN_FORMAT},
        'file': {
            'enabled': True,
            'level': 'DEBUG',
            'filename': 'disco_scheduling.log',
            'json_format': True,
            'max_bytes': 10 * 1024 * 1024,
            'backup_count': 5
        },
        'stage_files': {'enabled': True}
    }


def log_with_context(logger: logging.Logger, level: int, message: str, **context):
    """Log a message carrying structured fields"""
    record = logger.makeRecord(logger.name, level, __file__, 0, message, (), None)
    record.extra_fields = context
    logger.handle(record)


class PerformanceLogger:
    """Structured records for stage timings, model sizes, solves and big-M checks"""

    def __init__(self, logger_name: str = "performance"):
        self.logger = logging.getLogger(logger_name)

    def log_stage_time(self, stage: str, seconds: float, success: bool = True, **kwargs):
        log_with_context(self.logger, logging.INFO, f"Stage {stage} took {seconds:.3f}s",
                         metric_type='stage_time', stage=stage, processing_time_seconds=seconds,
                         success=success, **kwargs)

    def log_model_statistics(self, name: str, rows: int, columns: int, binaries: int,
                             nonzeros: int, **kwargs):
        log_with_context(self.logger, logging.INFO,
                         f"Model {name}: rows={rows} cols={columns} binaries={binaries} nnz={nonzeros}",
                         metric_type='model_statistics', model=name, rows=rows, columns=columns,
                         binaries=binaries, nonzeros=nonzeros, **kwargs)

    def log_solve_result(self, name: str, status: str, objective: Optional[float] = None,
                         nodes: int = 0, iterations: int = 0, wall_time: float = 0.0, **kwargs):
        fields = {'metric_type': 'solve_result', 'model': name, 'status': status, 'nodes': nodes,
                  'iterations': iterations, 'wall_time_seconds': wall_time, **kwargs}
        if objective is not None:
            fields['objective'] = objective
        log_with_context(self.logger, logging.INFO,
                         f"Solve {name}: status={status} objective={objective} nodes={nodes}", **fields)

    def log_big_m_warning(self, pair: str, kind: str, value: float, big_m: float):
        """A complementarity pair whose slack or dual sits at its big-M"""
        log_with_context(self.logger, logging.WARNING,
                         f"Big-M possibly invalid for {pair}: {kind}={value:.6g} bound={big_m:.6g}",
                         metric_type='big_m_warning', pair=pair, kind=kind, value=value, big_m=big_m)
