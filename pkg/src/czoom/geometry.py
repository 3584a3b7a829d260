"""
Axis-aligned box arithmetic.

Boxes are in corner form ``(x1, y1, x2, y2)`` with continuous pixel
coordinates; ``(x1, y1)`` is the top-left corner. Nothing here snaps to
integers, that only happens when pixels are cut out of a raster.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, List, Sequence

import numpy as np

from ._backend import kernels
from .errors import GeometryError


@dataclass(frozen=True)
class Box:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for name in ("x1", "y1", "x2", "y2"):
            v = getattr(self, name)
            if type(v) is not float:
                object.__setattr__(self, name, float(v))
        if not (self.x2 > self.x1 and self.y2 > self.y1):
            raise GeometryError(f"invalid box {self.as_tuple()}: needs x2 > x1 and y2 > y1")

    @classmethod
    def from_xywh(cls, x, y, w, h) -> "Box":
        return cls(float(x), float(y), float(x) + float(w), float(y) + float(h))

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    @property
    def center(self):
        return ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)

    def as_tuple(self):
        return (self.x1, self.y1, self.x2, self.y2)

    def to_xywh(self) -> List[float]:
        return [self.x1, self.y1, self.x2 - self.x1, self.y2 - self.y1]

    def contains(self, other: "Box", tol: float = 0.0) -> bool:
        return (
            other.x1 >= self.x1 - tol
            and other.y1 >= self.y1 - tol
            and other.x2 <= self.x2 + tol
            and other.y2 <= self.y2 + tol
        )

    def contains_point(self, x: float, y: float) -> bool:
        return self.x1 <= x <= self.x2 and self.y1 <= y <= self.y2


@dataclass(frozen=True)
class ImageExtent:
    width: int
    height: int

    def __post_init__(self):
        if int(self.width) != self.width or int(self.height) != self.height:
            raise GeometryError(f"image extent must be integral, got {self.width}x{self.height}")
        if self.width < 1 or self.height < 1:
            raise GeometryError(f"image extent must be at least 1x1, got {self.width}x{self.height}")

    @property
    def shorter_edge(self) -> int:
        return min(self.width, self.height)

    def as_box(self) -> Box:
        return Box(0.0, 0.0, float(self.width), float(self.height))


@dataclass(frozen=True)
class Detection:
    """A scored, categorised box attributed to one image."""

    image_id: Hashable
    category_id: int
    box: Box
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise GeometryError(f"detection score {self.score} outside [0, 1]")


def boxes_to_array(boxes: Iterable[Box]) -> np.ndarray:
    arr = np.array([b.as_tuple() for b in boxes], dtype=np.float64)
    return arr.reshape(-1, 4)


def iou(a: Box, b: Box) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(iw, 0.0) * max(ih, 0.0)
    return inter / ((a.area + b.area) - inter)


def pairwise_iou(boxes: Sequence[Box]) -> np.ndarray:
    """Symmetric ``len(boxes) x len(boxes)`` IoU matrix, ones on the diagonal."""
    return kernels.pairwise_iou(boxes_to_array(boxes))


def scale_by_pixels(b: Box, sigma: float) -> Box:
    """Grow every side by ``sigma`` pixels. The result is not clipped."""
    if sigma < 0:
        raise GeometryError(f"sigma must be non-negative, got {sigma}")
    return Box(b.x1 - sigma, b.y1 - sigma, b.x2 + sigma, b.y2 + sigma)


def scale_by_factor(b: Box, f: float) -> Box:
    """Scale width and height by ``f`` about the box centre."""
    if f <= 0:
        raise GeometryError(f"scale factor must be positive, got {f}")
    cx, cy = b.center
    hw = b.width * f / 2.0
    hh = b.height * f / 2.0
    return Box(cx - hw, cy - hh, cx + hw, cy + hh)


def enclosing_box(boxes: Sequence[Box]) -> Box:
    if len(boxes) == 0:
        raise GeometryError("empty member set")
    return Box(
        min(b.x1 for b in boxes),
        min(b.y1 for b in boxes),
        max(b.x2 for b in boxes),
        max(b.y2 for b in boxes),
    )


def clip_to_image(b: Box, ext: ImageExtent) -> Box:
    x1 = min(max(b.x1, 0.0), ext.width)
    y1 = min(max(b.y1, 0.0), ext.height)
    x2 = min(max(b.x2, 0.0), ext.width)
    y2 = min(max(b.y2, 0.0), ext.height)
    if not (x2 > x1 and y2 > y1):
        raise GeometryError(f"crop outside image: {b.as_tuple()} vs {ext.width}x{ext.height}")
    return Box(x1, y1, x2, y2)


def area_ratio(b: Box, ext: ImageExtent) -> float:
    return b.area / (ext.width * ext.height)


def upscaled_extent(b: Box, shorter_edge: int) -> ImageExtent:
    """Pixel extent of ``b`` resized so its shorter side is ``shorter_edge``; aspect kept."""
    if shorter_edge < 1:
        raise GeometryError(f"target resolution must be >= 1, got {shorter_edge}")
    if b.width <= b.height:
        return ImageExtent(int(shorter_edge), max(1, math.floor(shorter_edge * b.height / b.width + 0.5)))
    return ImageExtent(max(1, math.floor(shorter_edge * b.width / b.height + 0.5)), int(shorter_edge))


def nms(dets: Sequence[Detection], iou_threshold: float) -> List[Detection]:
    """Per-category greedy non-maximum suppression.

    Detections are visited by descending score (input order breaks ties);
    each kept detection removes the same-category detections whose IoU with
    it exceeds ``iou_threshold``. The survivors come back in visiting order.
    """
    if not dets:
        return []
    scores = np.array([d.score for d in dets], dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    labels = np.array([d.category_id for d in dets], dtype=np.int64)
    keep = kernels.nms_keep(boxes_to_array(d.box for d in dets), order, labels, float(iou_threshold))
    return [dets[i] for i in keep]
