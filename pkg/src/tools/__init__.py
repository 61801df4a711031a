"""
Standalone utilities: metrics, plotting and synthetic data.
"""
