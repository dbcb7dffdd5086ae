"""Capability tokens, verifiable credentials and smart contracts on a
simulated ledger, side by side."""

__version__ = "0.1.0"
