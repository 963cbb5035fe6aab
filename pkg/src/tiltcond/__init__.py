"""Conditioning of convex multiobjective problems under tilt perturbations."""

__version__ = "0.1.0"
