"""Sizing and pricing of renewable power-to-ammonia plants."""

__version__ = "0.1.0"
