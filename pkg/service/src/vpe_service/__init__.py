"""Perception HTTP service.

Three endpoints over base64 images: grounded object detection with a
depth-derived closeness scalar, OCR, and multiple-choice visual question
answering. Model backends are pluggable; the default suite is a set of
deterministic classical-CV reference models that work on the bundled sample
images, with adapters for neural models when their weights are available.
"""

__version__ = "0.1.0"
