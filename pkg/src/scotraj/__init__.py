"""Trajectory optimization for legged robots over uneven terrain.

Provides a staged pipeline (centroidal contact-implicit pass feeding a
full-order hybrid pass), standalone contact-implicit and fixed-sequence
hybrid pipelines, a bundled augmented-Lagrangian NLP solver, and a
physical-feasibility validator.
"""

__version__ = "0.1.0"
