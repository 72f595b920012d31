#!/usr/bin/env python3
"""
Setup script for dreammpc
Simple shim for pyproject.toml-based builds
"""

from setuptools import setup

if __name__ == "__main__":
    setup()
