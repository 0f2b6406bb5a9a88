"""
Reports and figure data
"""
