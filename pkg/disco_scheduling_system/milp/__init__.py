"""
Sparse MILP model, embedded solver and LP-format I/O
"""
