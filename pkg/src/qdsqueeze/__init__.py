"""Entanglement of two quantum dots near a plasmonic particle driven by squeezed light."""

__version__ = "0.1.0"

from .model import HBAR, SqueezeParams, SystemParams  # noqa: E402

__all__ = ["HBAR", "SqueezeParams", "SystemParams", "__version__"]
