"""Store-and-forward signal control with joint occupancy/demand estimation."""

__version__ = "0.1.0"
