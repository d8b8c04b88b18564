"""Partially observed multi-agent driving on recorded scenarios."""

__version__ = "0.1.0"
