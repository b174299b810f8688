"""Permissioned proof-of-authority ledger and simulator for auction-based energy trading."""

__version__ = "0.1.0"
