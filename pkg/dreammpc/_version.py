"""
Version information for dreammpc
"""

__version__ = "0.3.0"
