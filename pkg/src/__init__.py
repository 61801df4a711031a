"""
SST Graph Forecaster - static and dynamic learnable graphs with personalized graph convolution.
"""

__version__ = "0.1.0"
