"""
dreammpc package
Gradient-based model predictive control with a learned latent world model
"""

import logging

from ._version import __version__

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = ["__version__"]
