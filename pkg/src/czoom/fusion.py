"""
Two-stage inference fusion.

Stage one yields base-class detections plus ``density_crop`` detections on
the whole image. Confident crops become work orders for a second pass on the
upscaled crop; those detections are mapped back to the original image and
merged with stage one under per-category NMS.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, List, Optional, Sequence, Tuple

from .errors import FusionError, GeometryError
from .geometry import Box, Detection, ImageExtent, clip_to_image, nms, upscaled_extent

__all__ = [
    "CropWorkOrder",
    "Detection",
    "FusionConfig",
    "detections_from_results",
    "detections_to_results",
    "fuse",
    "reproject",
    "select_crops",
    "to_crop_coords",
]


@dataclass(frozen=True)
class CropWorkOrder:
    image_id: Hashable
    crop_box: Box
    extent: ImageExtent
    score: float = 1.0

    @classmethod
    def for_crop(cls, image_id, crop_box: Box, target_resolution: int, score: float = 1.0) -> "CropWorkOrder":
        return cls(image_id, crop_box, upscaled_extent(crop_box, target_resolution), score)

    @property
    def scale_factors(self) -> Tuple[float, float]:
        """Original-image pixels per crop-image pixel, along x and y."""
        return (self.crop_box.width / self.extent.width, self.crop_box.height / self.extent.height)

    def to_record(self, crop_id=None) -> dict:
        rec = {
            "image_id": self.image_id,
            "crop_box": list(self.crop_box.as_tuple()),
            "upscaled_extent": [self.extent.width, self.extent.height],
            "score": self.score,
        }
        if crop_id is not None:
            rec["crop_id"] = crop_id
        return rec

    @classmethod
    def from_record(cls, rec) -> "CropWorkOrder":
        w, h = rec["upscaled_extent"]
        return cls(rec["image_id"], Box(*(float(v) for v in rec["crop_box"])), ImageExtent(int(w), int(h)),
                   float(rec.get("score", 1.0)))


@dataclass(frozen=True)
class FusionConfig:
    crop_category_id: Optional[int] = None
    crop_confidence_threshold: float = 0.7
    crop_nms_iou: float = 0.5
    final_nms_iou: float = 0.5
    crop_target_resolution: int = 650

    def __post_init__(self):
        for name in ("crop_confidence_threshold", "crop_nms_iou", "final_nms_iou"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise FusionError(f"{name} must lie in (0, 1), got {v}")
        if self.crop_target_resolution < 1:
            raise FusionError(f"crop_target_resolution must be >= 1, got {self.crop_target_resolution}")


def select_crops(stage1: Sequence[Detection], cfg: FusionConfig, ext: ImageExtent) -> List[CropWorkOrder]:
    """Work orders for the confident, de-duplicated crop detections of one image."""
    crops = [
        d for d in stage1
        if d.category_id == cfg.crop_category_id and d.score >= cfg.crop_confidence_threshold
    ]
    orders = []
    for d in nms(crops, cfg.crop_nms_iou):
        try:
            box = clip_to_image(d.box, ext)
        except GeometryError:
            continue
        orders.append(CropWorkOrder.for_crop(d.image_id, box, cfg.crop_target_resolution, d.score))
    return orders


def reproject(dets_in_crop: Iterable[Detection], order: CropWorkOrder) -> List[Detection]:
    """Map crop-image detections back to original-image coordinates."""
    sw, sh = order.scale_factors
    cx, cy = order.crop_box.x1, order.crop_box.y1
    return [
        Detection(
            d.image_id,
            d.category_id,
            Box(sw * d.box.x1 + cx, sh * d.box.y1 + cy, sw * d.box.x2 + cx, sh * d.box.y2 + cy),
            d.score,
        )
        for d in dets_in_crop
    ]


def to_crop_coords(box: Box, order: CropWorkOrder) -> Box:
    """Inverse of :func:`reproject` for a single box (no clipping)."""
    sw, sh = order.scale_factors
    cx, cy = order.crop_box.x1, order.crop_box.y1
    return Box((box.x1 - cx) / sw, (box.y1 - cy) / sh, (box.x2 - cx) / sw, (box.y2 - cy) / sh)


def _clip_to_order(d: Detection, order: CropWorkOrder) -> Optional[Detection]:
    try:
        box = clip_to_image(d.box, order.extent)
    except GeometryError:
        return None
    return d if box == d.box else Detection(d.image_id, d.category_id, box, d.score)


def fuse(stage1: Sequence[Detection], stage2_by_crop: Sequence[Tuple[CropWorkOrder, Sequence[Detection]]],
         cfg: FusionConfig) -> List[Detection]:
    ids = {d.image_id for d in stage1}
    for order, dets in stage2_by_crop:
        ids.add(order.image_id)
        ids.update(d.image_id for d in dets)
    if len(ids) > 1:
        raise FusionError(f"fuse expects detections from one image, got image ids {sorted(ids, key=str)}")

    merged = [d for d in stage1 if d.category_id != cfg.crop_category_id]
    for order, dets in stage2_by_crop:
        clipped = [c for c in (_clip_to_order(d, order) for d in dets) if c is not None]
        merged.extend(d for d in reproject(clipped, order) if d.category_id != cfg.crop_category_id)
    return nms(merged, cfg.final_nms_iou)


def detections_from_results(records) -> List[Detection]:
    """Parse a COCO results list (``bbox`` as ``[x, y, w, h]``)."""
    out = []
    for i, rec in enumerate(records):
        try:
            out.append(Detection(rec["image_id"], int(rec["category_id"]), Box.from_xywh(*rec["bbox"]),
                                 float(rec["score"])))
        except KeyError as exc:
            raise FusionError(f"result record {i} is missing key {exc.args[0]!r}") from None
    return out


def detections_to_results(dets: Iterable[Detection]) -> List[dict]:
    return [
        {"image_id": d.image_id, "category_id": d.category_id, "bbox": d.box.to_xywh(), "score": d.score}
        for d in dets
    ]
