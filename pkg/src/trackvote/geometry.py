"""Axis-aligned boxes in pixel space and intersection-over-union.

Boxes are ``(x, y, w, h)`` with a top-left origin and continuous coordinates;
nothing here rounds to the pixel grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import OutOfRange


@dataclass(frozen=True)
class BBox:
    x: float
    y: float
    w: float
    h: float

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    def is_valid(self) -> bool:
        return all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h)) and self.w >= 0 and self.h >= 0

    def translated(self, dx: float, dy: float) -> BBox:
        return BBox(self.x + dx, self.y + dy, self.w, self.h)


def area(b: BBox) -> float:
    """Area in squared pixels; zero for degenerate boxes."""
    return b.w * b.h


def intersection(a: BBox, b: BBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes.

    Returns 0.0 when the union is empty (two zero-area boxes) so that callers
    sorting by IoU never see NaN.
    """
    if a == b:
        # x + w - x need not round back to w
        return 1.0 if area(a) > 0 else 0.0
    inter = intersection(a, b)
    union = area(a) + area(b) - inter
    if union <= 0:
        return 0.0
    # guard against rounding pushing identical boxes a hair above 1
    return min(inter / union, 1.0)


def from_normalized(cx: float, cy: float, w: float, h: float, img_w: float, img_h: float) -> BBox:
    """Convert a Darknet-style normalized centre box to pixels.

    Args:
        cx, cy: box centre as a fraction of image width/height.
        w, h: box size as a fraction of image width/height.
        img_w, img_h: image size in pixels.

    Raises:
        OutOfRange: if any ratio is outside [0, 1] or the image size is not positive.
    """
    for name, v in (("cx", cx), ("cy", cy), ("w", w), ("h", h)):
        if not 0.0 <= v <= 1.0:
            raise OutOfRange(f"{name}={v!r} not in [0, 1]")
    if not (img_w > 0 and img_h > 0):
        raise OutOfRange(f"image size {img_w}x{img_h} must be positive")
    return BBox((cx - w / 2) * img_w, (cy - h / 2) * img_h, w * img_w, h * img_h)


def to_normalized(b: BBox, img_w: float, img_h: float) -> tuple[float, float, float, float]:
    """Inverse of :func:`from_normalized`: ``(cx, cy, w, h)`` as image fractions."""
    if not (img_w > 0 and img_h > 0):
        raise OutOfRange(f"image size {img_w}x{img_h} must be positive")
    return ((b.x + b.w / 2) / img_w, (b.y + b.h / 2) / img_h, b.w / img_w, b.h / img_h)


def iou_matrix(boxes_a: Sequence[BBox], boxes_b: Sequence[BBox]) -> np.ndarray:
    """Pairwise IoU as an ``(len(a), len(b))`` array, same conventions as :func:`iou`."""
    a = np.array([(q.x, q.y, q.w, q.h) for q in boxes_a], dtype=float).reshape(-1, 4)
    b = np.array([(q.x, q.y, q.w, q.h) for q in boxes_b], dtype=float).reshape(-1, 4)
    iw = np.minimum(a[:, None, 0] + a[:, None, 2], b[None, :, 0] + b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 1] + a[:, None, 3], b[None, :, 1] + b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.where((iw > 0) & (ih > 0), iw * ih, 0.0)
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    return np.minimum(out, 1.0)
