"""
pyaev - Aggregated electric-vehicle flexibility via bilevel optimization

Builds per-vehicle charging profiles, dispatches them individually and as a
fleet, and fits time-dependent scaling factors on the aggregated bounds so the
fleet dispatch tracks the individual reference.
"""

__version__ = "0.1.0"
__author__ = "Mark Greene"
__email__ = "markdanielgreene@gmail.com"

__all__ = [
    "__version__",
]
