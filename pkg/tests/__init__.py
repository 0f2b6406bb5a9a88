"""
Test suite for the Disco Scheduling System
"""
