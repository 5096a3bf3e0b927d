"""Connectivity-aware UGV teleoperation simulator and DoA estimation toolkit."""

__version__ = "0.1.0"
