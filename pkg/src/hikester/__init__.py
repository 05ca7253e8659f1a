"""Hikester: a self-contained event management platform service."""

__version__ = "0.1.0"
