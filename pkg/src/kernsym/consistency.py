"""Flip consistency, shift consistency, and mean IoU over an image set.

A segmentation model here is anything whose forward pass maps a
(C, H, W) image to per-pixel class scores (n_classes, H', W'). The
predicted map is the per-pixel argmax with smallest-index tie-break.

Consistency is computed per image and averaged: the fraction of pixels
where transforming the input commutes with transforming the prediction.
Shifts compare only the overlap region; rows and columns vacated by the
shift are excluded from both numerator and denominator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyImageSet, IndexOutOfRange, ShapeMismatch, ShiftTooLarge


@dataclass(frozen=True)
class ConsistencyReport:
    kind: str                       # "flip" or "shift"
    fractions: tuple[float, ...]    # per image, in input order
    mean: float
    image_count: int
    shift: tuple[int, int] | None = None


def flip_h(x: np.ndarray) -> np.ndarray:
    """Reverse the last (width) axis."""
    return np.ascontiguousarray(x[..., ::-1])


def shift_map(m: np.ndarray, dy: int, dx: int, fill=0.0) -> tuple[np.ndarray, np.ndarray]:
    """Shift the last two axes by (dy, dx); returns (shifted, valid_mask).

    Positive dy moves content down, positive dx moves it right. Vacated
    cells hold fill and are marked invalid.
    """
    h, w = m.shape[-2], m.shape[-1]
    if abs(dy) >= h or abs(dx) >= w:
        raise ShiftTooLarge(f"shift ({dy}, {dx}) leaves no overlap on a {h}x{w} grid")
    out = np.full_like(m, fill)
    valid = np.zeros((h, w), dtype=bool)
    ys = slice(max(0, dy), h + min(0, dy))
    xs = slice(max(0, dx), w + min(0, dx))
    ys_src = slice(max(0, -dy), h + min(0, -dy))
    xs_src = slice(max(0, -dx), w + min(0, -dx))
    out[..., ys, xs] = m[..., ys_src, xs_src]
    valid[ys, xs] = True
    return out, valid


def predict_segmentation(model, image) -> np.ndarray:
    """Per-pixel argmax class map; ties go to the lower class index."""
    scores = model.forward(image)
    if scores.ndim != 3:
        raise ShapeMismatch(
            f"model output must be per-pixel class scores (n_classes, H, W), got {scores.shape}"
        )
    return np.argmax(scores, axis=0)


def flip_consistency(model, images) -> ConsistencyReport:
    """Fraction of pixels where predict(flip(I)) == flip(predict(I))."""
    fractions = []
    for image in images:
        a = predict_segmentation(model, flip_h(image))
        b = flip_h(predict_segmentation(model, image))
        fractions.append(float(np.mean(a == b)))
    if not fractions:
        raise EmptyImageSet("flip consistency needs at least one image")
    return ConsistencyReport(
        kind="flip",
        fractions=tuple(fractions),
        mean=float(np.mean(fractions)),
        image_count=len(fractions),
    )


def shift_consistency(model, images, shift: tuple[int, int]) -> ConsistencyReport:
    """Agreement of predict(shift(I)) and shift(predict(I)) over the overlap."""
    dy, dx = shift
    fractions = []
    for image in images:
        shifted, _ = shift_map(image, dy, dx)
        a = predict_segmentation(model, shifted)
        b, valid = shift_map(predict_segmentation(model, image), dy, dx, fill=-1)
        fractions.append(float(np.mean(a[valid] == b[valid])))
    if not fractions:
        raise EmptyImageSet("shift consistency needs at least one image")
    return ConsistencyReport(
        kind="shift",
        fractions=tuple(fractions),
        mean=float(np.mean(fractions)),
        image_count=len(fractions),
        shift=(dy, dx),
    )


def miou(predictions: np.ndarray, targets: np.ndarray, n_classes: int) -> float:
    """Mean IoU over classes present in prediction or target.

    Classes absent from both maps are excluded from the mean.
    """
    p = np.asarray(predictions)
    t = np.asarray(targets)
    if p.shape != t.shape:
        raise ShapeMismatch(f"prediction {p.shape} vs target {t.shape}")
    if p.min() < 0 or t.min() < 0 or p.max() >= n_classes or t.max() >= n_classes:
        raise IndexOutOfRange(f"class indices must lie in [0, {n_classes})")
    ious = []
    for c in range(n_classes):
        pc = p == c
        tc = t == c
        union = np.count_nonzero(pc | tc)
        if union == 0:
            continue
        ious.append(np.count_nonzero(pc & tc) / union)
    return float(np.mean(ious)) if ious else 1.0
