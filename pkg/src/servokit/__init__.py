"""Simulation workbench for image-based visual servoing of a 4-DOF arm,
plus the keypoint-dataset tooling that feeds a CNN corner detector."""

__version__ = "0.1.0"
