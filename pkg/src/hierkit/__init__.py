"""Toolkit for hierarchy-aware training dynamics.

Measures how classifiers treat broad categories versus fine-grained ones
over training: label-space projections of prediction logs, the relative
accuracy/gain/error curve family with closed-form baselines, mutual-cover
manifold similarity with cophenetic correlation against a taxonomy, and
neural-collapse statistics liftable to any superclass label space.  Synthetic
generators and Monte-Carlo oracles make every formula testable at desk scale.
"""

__version__ = "0.1.0"

from . import (collapse, hierarchy, io, labelspace, manifold, metrics, rng,
               synth)

__all__ = [
    "__version__",
    "collapse",
    "hierarchy",
    "io",
    "labelspace",
    "manifold",
    "metrics",
    "rng",
    "synth",
]
