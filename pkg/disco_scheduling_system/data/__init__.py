"""
Case data loading and bundled datasets
"""
