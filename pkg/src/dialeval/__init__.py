"""Scoring harness for knowledge-grounded task-oriented dialogue.

Three-stage pipeline (knowledge-seeking turn detection, snippet
selection, grounded response generation), the full objective metric
suite with detection-weighted end-to-end composition, leaderboard
ranking across submissions, and a human-rating collection service.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
