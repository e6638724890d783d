"""Monocular localization in compressed LiDAR heat maps."""

__version__ = "0.1.0"
