"""Coarse-to-fine clay sculpting in simulation: segment planning, regional
point-cloud perception, geometric sub-goals and a learned grasp model."""

__version__ = "0.1.0"
