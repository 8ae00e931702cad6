"""Smooth zero-set representations of closed sets and set-valued maps.

The core object is a finite series of smooth cut terms whose zero set is an
outer approximation of a target set or of the graph of a parametric
set-valued map.  On top of it the package provides sublevel-set
approximants, smooth lower approximations of integrands, Moreau envelopes,
integrated set-distance metrics, scenario-based integral functionals, and a
CLI driving the whole pipeline from JSON instance files.
"""

from .bump import SmoothBump, bump_offset, make_bump, theta_eval

__all__ = [
    "SmoothBump",
    "bump_offset",
    "make_bump",
    "theta_eval",
]

__version__ = "0.1.0"
