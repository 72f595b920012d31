"""Utility helpers for dreammpc."""
