"""
Bi-level to single-level MILP compilation
"""
