"""Accountable data dispersal fused with a two-phase BFT protocol, plus the inclusion-probability toolkit."""

__version__ = "0.1.0"
