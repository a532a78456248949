# flowtopo/services/__init__.py
"""
Services Module

Orchestration on top of the pure operations: CSV input/output, automatic
scale selection from the dominant H1 class and the resumable SNR sweep.
"""
