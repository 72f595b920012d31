"""Configuration package for dreammpc."""
