"""
synthgym - Synthetic clinical time series from a recurrent WGAN-GP with a correlation alignment loss
"""

__version__ = "0.1.0"
