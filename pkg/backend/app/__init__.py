"""
Wildfire-cause forecasting engine.
"""
