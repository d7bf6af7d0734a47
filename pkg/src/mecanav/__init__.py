"""Mecanum robot stack: odometry, particle-filter SLAM, path-transform
navigation, a deterministic 2D simulator and a benchmark harness."""

__version__ = "0.1.0"
