"""Controllable descendant-face synthesis toolkit.

Two-module GAN (inheritance + attribute enhancement) trained without
ground-truth child faces via facial component exchange, plus a CLI and an
HTTP synthesis service.
"""

__version__ = "0.1.0"
