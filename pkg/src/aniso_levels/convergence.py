"""Two-grid Richardson extrapolation for second-order discretisations."""

import numpy as np


def richardson(coarse, fine, h_coarse, h_fine, order=2):
    """Extrapolate values computed at two spacings to zero spacing.

    Returns ``(value, error)`` where ``error`` is the size of the correction
    applied to the fine-grid value. That estimates the fine-grid
    discretisation error and is used as a (conservative) error bar on the
    extrapolated value.
    """
    coarse = np.asarray(coarse, dtype=float)
    fine = np.asarray(fine, dtype=float)
    if not h_fine < h_coarse:
        raise ValueError("h_fine must be smaller than h_coarse")
    ratio = (h_coarse / h_fine) ** order
    value = fine + (fine - coarse) / (ratio - 1.0)
    error = np.abs(value - fine)
    return value, error


def combined(*errors):
    """Combine independent error bars by simple addition (conservative)."""
    return float(sum(abs(e) for e in errors))
