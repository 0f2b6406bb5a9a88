"""
Linearized distribution power flow
"""
