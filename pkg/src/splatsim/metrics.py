"""Image-quality metrics for render/capture comparison.

Images are float arrays normalized to [0, 1]; averaging is joint over
all pixels and channels, with peak value 1.0 for PSNR.
"""
from __future__ import annotations

import numpy as np


def _check_pair(reference, test):
    ref = np.asarray(reference, dtype=np.float64)
    tst = np.asarray(test, dtype=np.float64)
    if ref.shape != tst.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {tst.shape}")
    if not (np.all(np.isfinite(ref)) and np.all(np.isfinite(tst))):
        raise ValueError("images must be finite")
    return ref, tst


def l1(reference, test) -> float:
    """Mean absolute error over all pixels and channels."""
    ref, tst = _check_pair(reference, test)
    return float(np.mean(np.abs(ref - tst)))


def psnr(reference, test) -> float:
    """Peak signal-to-noise ratio in dB, peak 1.0; +inf for identical images."""
    ref, tst = _check_pair(reference, test)
    mse = float(np.mean((ref - tst) ** 2))
    if mse == 0.0:
        return float("inf")
    return -10.0 * np.log10(mse)
