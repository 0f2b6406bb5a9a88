"""
Second-stage scenario generation
"""
