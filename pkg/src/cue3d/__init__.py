"""Cue-perturbation benchmark harness for single-image-to-3D models."""

__version__ = "0.1.0"
