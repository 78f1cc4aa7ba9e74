"""
Test package for the wildfire-cause forecasting engine.
"""
