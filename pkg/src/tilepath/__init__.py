"""Tile-based skin detection and seven-class acne tile classification."""

__version__ = "0.1.0"
