"""Blockchain-assisted parked-vehicle edge computing: consensus-node selection,
CDS-Hotstuff cost accounting and Stackelberg offloading/pricing."""

__version__ = "0.1.0"
