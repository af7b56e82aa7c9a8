"""Hexagonal-grid TDoA UAV localization with RSSI-based reference selection."""

__version__ = "0.1.0"
