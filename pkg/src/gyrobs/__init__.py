"""Gyrobs: globally convergent attitude and gyro-bias observers."""

__version__ = "0.1.0"
