"""
System configuration: config.yaml, .env overrides and built-in defaults
"""

import copy
import logging
import os
from typing import Dict, Any, Optional

import yaml
from dotenv import load_dotenv

from .logging_config import get_default_logging_config

logger = logging.getLogger(__name__)


def get_default_config() -> Dict[str, Any]:
    """Get default configuration"""
    return {
        'logging': get_default_logging_config(),
        'scheduler': {
            'case_dir': os.path.join(os.path.dirname(os.path.dirname(__file__)), 'data', 'ieee33'),
            'output_dir': 'output',
            'backend': 'embedded',
            'workers': 1,
            'mip_gap': 1e-6,
            'node_limit': 100000,
            'time_limit': 600.0,
            'tolerances': {
                'feasibility': 1e-5,
                'integrality': 1e-6,
                'import': 1e-5,
                'report': 1e-4,
                'bilevel': 1e-5
            }
        }
    }


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(config_path: Optional[str] = None) -> Dict[str, Any]:
    """Load configuration from YAML, falling back to defaults"""
    load_dotenv()

    config_path = config_path or os.getenv('DISCO_CONFIG', 'config.yaml')
    config = get_default_config()

    try:
        if os.path.exists(config_path):
            with open(config_path, 'r') as f:
                config = _merge(config, yaml.safe_load(f) or {})
        else:
            logger.debug(f"Config file {config_path} not found, using defaults")
    except yaml.YAMLError as e:
        logger.error(f"Error loading config {config_path}: {e}")

    level = os.getenv('DISCO_LOG_LEVEL')
    if level:
        config['logging']['level'] = level.upper()
        config['logging'].setdefault('console', {})['level'] = level.upper()

    output_dir = os.getenv('DISCO_OUTPUT_DIR')
    if output_dir:
        config['scheduler']['output_dir'] = output_dir

    return config
