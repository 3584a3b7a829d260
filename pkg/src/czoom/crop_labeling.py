"""
Density crop labeling from ground-truth boxes.

Boxes are first expanded, then merged over ``n_steps`` rounds: each round
thresholds the pairwise IoU of the working set into an overlap graph and
greedily peels off max-degree stars, replacing every star by the box
enclosing it. Crops larger than ``pi`` of the image are dropped after each
round. The single-step variants do one round after scaling by a factor or
by a fixed number of pixels.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Optional, Sequence

import numpy as np

from ._backend import kernels
from .errors import CZoomError
from .geometry import (
    Box,
    ImageExtent,
    area_ratio,
    boxes_to_array,
    clip_to_image,
    enclosing_box,
    scale_by_factor,
    scale_by_pixels,
)

log = logging.getLogger(__name__)

STRATEGIES = ("iterative", "single_step_factor", "single_step_pixels")


@dataclass(frozen=True)
class CropLabelConfig:
    n_steps: int = 2
    sigma: float = 20.0
    theta: float = 0.1
    pi: float = 0.3
    min_members: int = 2
    strategy: str = "iterative"
    # scale factor for single_step_factor, pixels for single_step_pixels
    strategy_param: Optional[float] = None

    def __post_init__(self):
        if self.n_steps < 1:
            raise CZoomError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.sigma < 0:
            raise CZoomError(f"sigma must be >= 0, got {self.sigma}")
        if not 0.0 < self.theta < 1.0:
            raise CZoomError(f"theta must lie in (0, 1), got {self.theta}")
        if not 0.0 < self.pi <= 1.0:
            raise CZoomError(f"pi must lie in (0, 1], got {self.pi}")
        if self.min_members < 2:
            raise CZoomError(f"min_members must be >= 2, got {self.min_members}")
        if self.strategy not in STRATEGIES:
            raise CZoomError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.strategy != "iterative":
            if self.strategy_param is None or self.strategy_param <= 0:
                raise CZoomError(f"strategy {self.strategy} needs a positive strategy_param")


@dataclass(frozen=True)
class DensityCrop:
    box: Box
    member_count: int
    source_image_id: Hashable = None


@dataclass
class _Item:
    box: Box
    count: int
    seed: bool


def filter_size(items, ext: ImageExtent, pi: float):
    """Drop everything whose area exceeds ``pi`` of the image."""
    return [it for it in items if area_ratio(_box_of(it), ext) <= pi]


def _box_of(item):
    return item if isinstance(item, Box) else item.box


def merge_round(items: List[_Item], theta: float, min_members: int) -> List[_Item]:
    """One merging round: star-decompose the overlap graph and enclose each star.

    Stars come out in formation order; untouched earlier crops carry over
    after them, untouched seeds are discarded.
    """
    if not items:
        return []
    conn = kernels.pairwise_iou(boxes_to_array(it.box for it in items)) > theta
    np.fill_diagonal(conn, False)
    groups = kernels.star_cover(conn, min_members - 1)
    absorbed = set()
    out = []
    for members in groups:
        absorbed.update(members)
        out.append(
            _Item(
                enclosing_box([items[m].box for m in members]),
                sum(items[m].count for m in members),
                seed=False,
            )
        )
    out.extend(it for i, it in enumerate(items) if i not in absorbed and not it.seed)
    return out


def _run(seeds: List[Box], ext: ImageExtent, n_steps: int, theta: float, pi: float,
         min_members: int, image_id) -> List[DensityCrop]:
    items = [_Item(b, 1, seed=True) for b in seeds]
    for _ in range(n_steps):
        items = filter_size(merge_round(items, theta, min_members), ext, pi)
    return [DensityCrop(clip_to_image(it.box, ext), it.count, image_id) for it in items]


def label_crops(gt_boxes: Sequence[Box], ext: ImageExtent, cfg: CropLabelConfig = CropLabelConfig(),
                image_id=None) -> List[DensityCrop]:
    """Label the density crops of one image from its ground-truth boxes.

    With a single-step ``cfg.strategy`` this defers to
    :func:`label_crops_single_step`.
    """
    if cfg.strategy != "iterative":
        return label_crops_single_step(gt_boxes, ext, cfg, image_id=image_id)
    seeds = [scale_by_pixels(b, cfg.sigma) for b in gt_boxes]
    return _run(seeds, ext, cfg.n_steps, cfg.theta, cfg.pi, cfg.min_members, image_id)


def label_crops_single_step(gt_boxes: Sequence[Box], ext: ImageExtent, cfg: CropLabelConfig,
                            image_id=None) -> List[DensityCrop]:
    if cfg.strategy == "single_step_factor":
        seeds = [scale_by_factor(b, cfg.strategy_param) for b in gt_boxes]
    elif cfg.strategy == "single_step_pixels":
        seeds = [scale_by_pixels(b, cfg.strategy_param) for b in gt_boxes]
    else:
        raise CZoomError(f"label_crops_single_step needs a single-step strategy, got {cfg.strategy!r}")
    return _run(seeds, ext, 1, cfg.theta, cfg.pi, cfg.min_members, image_id)


@dataclass
class CropStatistics:
    n_images: int = 0
    total_crops: int = 0
    crops_per_image: float = 0.0
    crops_per_image_histogram: Dict[int, int] = field(default_factory=dict)
    member_count_histogram: Dict[int, int] = field(default_factory=dict)
    area_ratio_summary: Dict[str, float] = field(default_factory=dict)

    def to_dict(self):
        return {
            "n_images": self.n_images,
            "total_crops": self.total_crops,
            "crops_per_image": self.crops_per_image,
            "crops_per_image_histogram": {str(k): v for k, v in sorted(self.crops_per_image_histogram.items())},
            "member_count_histogram": {str(k): v for k, v in sorted(self.member_count_histogram.items())},
            "area_ratio_summary": dict(self.area_ratio_summary),
        }


def summarize_crops(per_image: Sequence[Sequence[DensityCrop]], extents: Sequence[ImageExtent]) -> CropStatistics:
    stats = CropStatistics(n_images=len(per_image))
    ratios = []
    members = Counter()
    per_count = Counter()
    for crops, ext in zip(per_image, extents):
        per_count[len(crops)] += 1
        for c in crops:
            members[c.member_count] += 1
            ratios.append(area_ratio(c.box, ext))
    stats.total_crops = len(ratios)
    stats.crops_per_image = stats.total_crops / stats.n_images if stats.n_images else 0.0
    stats.crops_per_image_histogram = dict(per_count)
    stats.member_count_histogram = dict(members)
    if ratios:
        r = np.asarray(ratios)
        stats.area_ratio_summary = {
            "min": float(r.min()),
            "median": float(np.median(r)),
            "mean": float(r.mean()),
            "max": float(r.max()),
        }
    else:
        stats.area_ratio_summary = {"min": 0.0, "median": 0.0, "mean": 0.0, "max": 0.0}
    return stats


def crop_statistics(dataset, cfg: CropLabelConfig = CropLabelConfig(), workers: int = 1) -> CropStatistics:
    """Label every original image of ``dataset`` and summarise the crops."""
    from .dataset import label_dataset

    labeled = label_dataset(dataset, cfg, workers=workers)
    extents = [img.extent for img, _ in labeled]
    return summarize_crops([crops for _, crops in labeled], extents)
