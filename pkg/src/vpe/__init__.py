"""Interpretable text-to-image evaluation toolkit.

Evaluation programs are short lists of visual-module calls (object presence,
counting, spatial and scale relations, rendered text, visual QA) executed
against a perception backend. Each call returns a binary score with a textual
explanation and bounding-box evidence; the program score is the mean.
"""

from .errors import VpeError

__all__ = ["VpeError"]
__version__ = "0.1.0"
