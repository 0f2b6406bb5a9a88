"""
Case pipeline orchestration
"""
