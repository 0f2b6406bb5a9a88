"""
Disco Scheduling System - flexibility-constrained Disco/microgrid scheduling
"""

__version__ = "1.0.0"
__author__ = "Disco Scheduling Team"
