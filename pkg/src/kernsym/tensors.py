"""Dense rank-4 tensors and square kernel matrices.

Conventions used everywhere in this package:

* weight tensors are row-major float64 arrays with dims (N, C, H, W),
  N = output neurons, C = input channels, H/W = kernel rows/cols;
* a kernel matrix is a square 2-D float64 array;
* all analysis arithmetic runs in 64-bit floats even when a container
  stores 32-bit data, so scores reproduce across platforms;
* NaN/Inf are rejected at validation time, never propagated.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteValues, NonSquareKernel, ZeroNorm


def check_tensor4(data, name: str = "tensor") -> np.ndarray:
    """Validate and return a (N, C, H, W) float64 array.

    Accepts anything array-like; rejects wrong rank, empty dims, and
    non-finite entries.
    """
    a = np.asarray(data, dtype=np.float64)
    if a.ndim != 4:
        raise NonSquareKernel(f"{name}: expected rank-4 (N, C, H, W), got rank {a.ndim}")
    if min(a.shape) < 1:
        raise NonFiniteValues(f"{name}: every dim must be >= 1, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteValues(f"{name}: contains NaN or Inf")
    return np.ascontiguousarray(a)


def check_kernel(data, name: str = "kernel") -> np.ndarray:
    """Validate and return a square k x k float64 matrix."""
    m = np.asarray(data, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise NonSquareKernel(f"{name}: expected square 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteValues(f"{name}: contains NaN or Inf")
    return np.ascontiguousarray(m)


def frobenius_norm(m) -> float:
    """sqrt of the sum of squared entries, accumulated in float64."""
    a = check_kernel(m)
    return float(np.sqrt(np.sum(a * a)))


def normalize(m) -> np.ndarray:
    """Return m scaled to unit Frobenius norm.

    Raises ZeroNorm for an all-zero kernel; callers must skip or report
    the layer as undefined rather than substituting a number.
    """
    a = check_kernel(m)
    norm = float(np.sqrt(np.sum(a * a)))
    if norm == 0.0:
        raise ZeroNorm("cannot normalize an all-zero kernel")
    return a / norm


def mean_kernel(w) -> np.ndarray:
    """Average a (N, C, k, k) weight tensor over neurons and channels.

    The average is flat over the N*C kernel slices (no per-channel
    weighting). Requires square spatial dims.
    """
    a = check_tensor4(w, "weights")
    if a.shape[2] != a.shape[3]:
        raise NonSquareKernel(f"weights: spatial dims must be square, got {a.shape[2]}x{a.shape[3]}")
    return np.mean(a, axis=(0, 1))
