# lapinfer/__init__.py
"""
Hypothesis testing on samples of networks through their graph Laplacians.
"""

__version__ = "0.1.0"
