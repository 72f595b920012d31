"""Data models for dreammpc."""
