"""Dihedral symmetry scores for kernels and per-model symmetry profiles.

The score of a kernel K is

    S(K) = 1 - (1 / (2 * 7)) * sum over the 7 non-identity D4 transforms T
           of ||T(K_hat) - K_hat||_F,      K_hat = K / ||K||_F.

S is 1 exactly when the normalized kernel is fixed by the whole group,
stays in [0, 1] (each distance is at most 2 on the unit sphere), and is
invariant to kernel scale. An all-zero kernel has no normalized form, so
its score is explicitly undefined rather than a sentinel number.
"""

from __future__ import annotations

import fnmatch
from dataclasses import dataclass

import numpy as np

from . import dihedral
from .errors import MissingWeight
from .rng import CounterRng, mix_seed
from .tensors import check_kernel, check_tensor4, mean_kernel

_N_TRANSFORMS = len(dihedral.non_identity_set())


@dataclass(frozen=True)
class SymmetryScore:
    """Symmetry of one kernel; value is meaningless when defined is False."""

    value: float
    layer_name: str
    kernel_side: int
    defined: bool

    @property
    def trivially_symmetric(self) -> bool:
        """1x1 kernels are fixed by every transform, so their 1.0 is forced."""
        return self.kernel_side == 1


@dataclass(frozen=True)
class ProfileEntry:
    score: SymmetryScore
    strided: bool


@dataclass(frozen=True)
class SymmetryProfile:
    """Ordered per-layer symmetry scores of a model, in manifest layer order."""

    model: str
    entries: tuple[ProfileEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)


def _batch_values(kernels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scores for a stack of kernels, shape (m, k, k). Returns (values, defined)."""
    m, k = kernels.shape[0], kernels.shape[1]
    flat = kernels.reshape(m, k * k)
    norms = np.sqrt(np.sum(flat * flat, axis=1))
    defined = norms > 0.0
    hat = np.zeros_like(flat)
    if np.any(defined):
        hat[defined] = flat[defined] / norms[defined, None]
    total = np.zeros(m, dtype=np.float64)
    for t in dihedral.non_identity_set():
        diff = hat[:, dihedral.permutation(t, k)] - hat
        total += np.sqrt(np.sum(diff * diff, axis=1))
    values = 1.0 - total / (2.0 * _N_TRANSFORMS)
    values[~defined] = np.nan
    return values, defined


def symmetry_score(kernel, layer_name: str = "") -> SymmetryScore:
    """Score one square kernel. Zero-norm kernels come back defined=False."""
    a = check_kernel(kernel)
    values, defined = _batch_values(a[None, :, :])
    if not defined[0]:
        return SymmetryScore(float("nan"), layer_name, a.shape[0], False)
    return SymmetryScore(float(values[0]), layer_name, a.shape[0], True)


def model_symmetry_profile(store, manifest, name_filter: str = "*") -> SymmetryProfile:
    """Score the mean kernel of every conv layer whose name matches the glob.

    Layers appear in manifest order. A layer with any stride > 1 is
    flagged strided. Raises MissingWeight when a selected binding is
    absent from the store; an empty filter match yields an empty profile.
    """
    entries: list[ProfileEntry] = []
    for layer in manifest.layers:
        if layer.kind != "conv2d":
            continue
        if not fnmatch.fnmatchcase(layer.name, name_filter):
            continue
        if layer.weight not in store:
            raise MissingWeight(f"layer {layer.name!r}: tensor {layer.weight!r} not in store")
        w = check_tensor4(store.to_array(layer.weight), layer.weight)
        score = symmetry_score(mean_kernel(w), layer_name=layer.name)
        strided = max(layer.spec.stride) > 1
        entries.append(ProfileEntry(score=score, strided=strided))
    return SymmetryProfile(model=manifest.model, entries=tuple(entries))


def expected_init_symmetry(
    k: int, n_kernels: int, trials: int, seed: int
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of S(mean of n_kernels random kernels).

    Kernels are i.i.d. zero-mean normals at Kaiming scale sqrt(2 / (k*k));
    the score is scale-free so only the shape of the distribution matters.
    Deterministic given seed. Requires trials >= 100 for a usable error bar.
    """
    if k < 1 or n_kernels < 1:
        raise ValueError("k and n_kernels must be >= 1")
    if trials < 100:
        raise ValueError("trials must be >= 100")
    if k == 1:
        return 1.0, 0.0
    rng = CounterRng(mix_seed(seed, stream=0x1A17))
    draws = rng.normals(trials * n_kernels * k * k) * np.sqrt(2.0 / (k * k))
    means = draws.reshape(trials, n_kernels, k, k).mean(axis=1)
    values, defined = _batch_values(means)
    vals = values[defined]
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
    return mean, stderr
