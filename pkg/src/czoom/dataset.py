"""
COCO-style dataset records, loading/saving, and density-crop augmentation.

Augmentation adds a ``density_crop`` category, one crop annotation per
labeled crop on its source image, and one new image record per crop whose
provenance (parent id, crop box, scale factors) is enough to rebuild the
crop raster later or map its boxes back to the parent.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from . import jsonio
from .crop_labeling import CropLabelConfig, DensityCrop, label_crops
from .errors import DatasetError, DatasetParseError, GeometryError, IntegrityError
from .geometry import Box, ImageExtent, upscaled_extent

log = logging.getLogger(__name__)

CROP_CATEGORY_NAME = "density_crop"


@dataclass(frozen=True)
class Category:
    id: int
    name: str


@dataclass(frozen=True)
class CropProvenance:
    parent_image_id: int
    crop_box: Box
    # upscale factors (crop image pixels per parent pixel) along x and y
    scale_factors: Tuple[float, float]


@dataclass(frozen=True)
class AnnotatedImage:
    id: int
    file_name: str
    extent: ImageExtent
    provenance: Optional[CropProvenance] = None

    @property
    def is_crop(self) -> bool:
        return self.provenance is not None


@dataclass(frozen=True)
class Annotation:
    id: int
    image_id: int
    category_id: int
    box: Box
    area: float
    iscrowd: bool = False


@dataclass
class Dataset:
    images: List[AnnotatedImage] = field(default_factory=list)
    annotations: List[Annotation] = field(default_factory=list)
    categories: List[Category] = field(default_factory=list)
    # zero-area annotations discarded at load time
    dropped: int = field(default=0, compare=False)

    def image_by_id(self) -> Dict[int, AnnotatedImage]:
        return {img.id: img for img in self.images}

    def annotations_by_image(self) -> Dict[int, List[Annotation]]:
        out: Dict[int, List[Annotation]] = {img.id: [] for img in self.images}
        for ann in self.annotations:
            out.setdefault(ann.image_id, []).append(ann)
        return out

    def category_id(self, name: str) -> Optional[int]:
        for c in self.categories:
            if c.name == name:
                return c.id
        return None


@dataclass(frozen=True)
class AugmentConfig:
    crop_category_name: str = CROP_CATEGORY_NAME
    target_resolution: int = 650
    crop_label: CropLabelConfig = CropLabelConfig()

    def __post_init__(self):
        if self.target_resolution < 1:
            raise DatasetError(f"target_resolution must be >= 1, got {self.target_resolution}")


def _require(record, key, where):
    try:
        return record[key]
    except (KeyError, TypeError):
        raise DatasetError(f"{where} is missing required key {key!r}") from None


def dataset_from_dict(doc) -> Dataset:
    """Build a validated :class:`Dataset` from a parsed COCO document."""
    if not isinstance(doc, dict):
        raise DatasetError("COCO document must be a JSON object")
    categories = [
        Category(int(_require(c, "id", "category")), str(_require(c, "name", "category")))
        for c in doc.get("categories", [])
    ]
    raw_images = doc.get("images", [])
    images = []
    seen = set()
    dup = []
    for rec in raw_images:
        img_id = _require(rec, "id", "image")
        if img_id in seen:
            dup.append(img_id)
        seen.add(img_id)
        ext = ImageExtent(int(_require(rec, "width", f"image {img_id}")), int(_require(rec, "height", f"image {img_id}")))
        images.append(AnnotatedImage(img_id, str(rec.get("file_name", f"{img_id}.jpg")), ext))
    if dup:
        raise IntegrityError(f"duplicate image ids: {dup}", dup)

    by_id = {img.id: img for img in images}
    bad_parents = []
    for i, rec in enumerate(raw_images):
        prov = rec.get("crop_provenance")
        if not prov:
            continue
        parent_id = _require(prov, "parent_image_id", f"crop_provenance of image {rec['id']}")
        parent = by_id.get(parent_id)
        crop_box = Box.from_xywh(*_require(prov, "crop_box", "crop_provenance"))
        if parent is None or not parent.extent.as_box().contains(crop_box, tol=1e-6):
            bad_parents.append(rec["id"])
            continue
        sx, sy = _require(prov, "scale_factors", "crop_provenance")
        images[i] = replace(images[i], provenance=CropProvenance(parent_id, crop_box, (float(sx), float(sy))))
    if bad_parents:
        raise IntegrityError(f"images with invalid crop provenance: {bad_parents}", bad_parents)

    cat_ids = {c.id for c in categories}
    annotations = []
    offenders = []
    dropped = 0
    for rec in doc.get("annotations", []):
        ann_id = _require(rec, "id", "annotation")
        image_id = _require(rec, "image_id", f"annotation {ann_id}")
        category_id = _require(rec, "category_id", f"annotation {ann_id}")
        if image_id not in by_id:
            offenders.append(f"annotation {ann_id} references missing image id {image_id}")
            continue
        if category_id not in cat_ids:
            offenders.append(f"annotation {ann_id} references missing category id {category_id}")
            continue
        x, y, w, h = (float(v) for v in _require(rec, "bbox", f"annotation {ann_id}"))
        ext = by_id[image_id].extent
        x1, y1 = max(x, 0.0), max(y, 0.0)
        x2, y2 = min(x + w, float(ext.width)), min(y + h, float(ext.height))
        if w <= 0 or h <= 0 or x2 <= x1 or y2 <= y1:
            dropped += 1
            continue
        box = Box(x1, y1, x2, y2)
        clipped = (x1, y1, x2, y2) != (x, y, x + w, y + h)
        area = rec.get("area")
        area = box.area if area is None or clipped else float(area)
        annotations.append(Annotation(ann_id, image_id, category_id, box, area, bool(rec.get("iscrowd", 0))))
    if offenders:
        raise IntegrityError("dangling references: " + "; ".join(offenders), offenders)
    if dropped:
        log.warning("dropped %d zero-area annotation(s)", dropped)
    return Dataset(images, annotations, categories, dropped=dropped)


def load_dataset(path) -> Dataset:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DatasetParseError(f"{path}: not valid UTF-8", exc.start) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise DatasetParseError(f"{path}: {exc.msg}", offset) from None
    return dataset_from_dict(doc)


def dataset_to_dict(ds: Dataset) -> dict:
    images = []
    for img in ds.images:
        rec = {"id": img.id, "file_name": img.file_name, "width": img.extent.width, "height": img.extent.height}
        if img.provenance is not None:
            p = img.provenance
            rec["crop_provenance"] = {
                "parent_image_id": p.parent_image_id,
                "crop_box": p.crop_box.to_xywh(),
                "scale_factors": list(p.scale_factors),
            }
        images.append(rec)
    annotations = [
        {
            "id": a.id,
            "image_id": a.image_id,
            "category_id": a.category_id,
            "bbox": a.box.to_xywh(),
            "area": a.area,
            "iscrowd": int(a.iscrowd),
        }
        for a in ds.annotations
    ]
    categories = [{"id": c.id, "name": c.name} for c in ds.categories]
    return {"images": images, "annotations": annotations, "categories": categories}


def save_dataset(ds: Dataset, path) -> None:
    jsonio.dump(dataset_to_dict(ds), path)


def _label_one(args, cfg):
    image_id, ext, boxes = args
    return label_crops(boxes, ext, cfg, image_id=image_id)


def label_dataset(ds: Dataset, cfg: CropLabelConfig = CropLabelConfig(), workers: int = 1,
                  crop_category_name: str = CROP_CATEGORY_NAME) -> List[Tuple[AnnotatedImage, List[DensityCrop]]]:
    """Run crop labeling on every original image; crop images are skipped."""
    crop_cat = ds.category_id(crop_category_name)
    by_image = ds.annotations_by_image()
    originals = [img for img in ds.images if not img.is_crop]
    jobs = [
        (img.id, img.extent, [a.box for a in by_image.get(img.id, []) if a.category_id != crop_cat])
        for img in originals
    ]
    results = jsonio.parallel_map(partial(_label_one, cfg=cfg), jobs, workers)
    return list(zip(originals, results))


def _crop_file_name(parent: AnnotatedImage, k: int) -> str:
    stem, ext = os.path.splitext(parent.file_name)
    return f"{stem}_crop{k}{ext or '.jpg'}"


def to_crop_coords(box: Box, prov: CropProvenance, ext: ImageExtent) -> Optional[Box]:
    """Map a parent-image box into crop-image pixels, clipped to the crop; None if nothing is left."""
    c = prov.crop_box
    sx, sy = prov.scale_factors
    x1 = min(max((box.x1 - c.x1) * sx, 0.0), float(ext.width))
    y1 = min(max((box.y1 - c.y1) * sy, 0.0), float(ext.height))
    x2 = min(max((box.x2 - c.x1) * sx, 0.0), float(ext.width))
    y2 = min(max((box.y2 - c.y1) * sy, 0.0), float(ext.height))
    if x2 <= x1 or y2 <= y1:
        return None
    return Box(x1, y1, x2, y2)


def augment_with_crops(ds: Dataset, cfg: AugmentConfig = AugmentConfig(), workers: int = 1) -> Dataset:
    if ds.category_id(cfg.crop_category_name) is not None:
        raise DatasetError("crop class already present")
    crop_cat = max((c.id for c in ds.categories), default=0) + 1
    categories = list(ds.categories) + [Category(crop_cat, cfg.crop_category_name)]

    next_image = max((img.id for img in ds.images), default=0) + 1
    next_ann = max((a.id for a in ds.annotations), default=0) + 1
    images = list(ds.images)
    annotations = list(ds.annotations)
    by_image = ds.annotations_by_image()

    for parent, crops in label_dataset(ds, cfg.crop_label, workers, cfg.crop_category_name):
        gt = by_image.get(parent.id, [])
        for k, crop in enumerate(crops):
            annotations.append(Annotation(next_ann, parent.id, crop_cat, crop.box, crop.box.area))
            next_ann += 1
            ext = upscaled_extent(crop.box, cfg.target_resolution)
            prov = CropProvenance(
                parent.id, crop.box, (ext.width / crop.box.width, ext.height / crop.box.height)
            )
            images.append(AnnotatedImage(next_image, _crop_file_name(parent, k), ext, prov))
            for ann in gt:
                if not crop.box.contains_point(*ann.box.center):
                    continue
                box = to_crop_coords(ann.box, prov, ext)
                if box is None:
                    continue
                annotations.append(Annotation(next_ann, next_image, ann.category_id, box, box.area, ann.iscrowd))
                next_ann += 1
            next_image += 1
    return Dataset(images, annotations, categories)


@dataclass
class ExtractReport:
    written: int = 0
    failures: List[Tuple[str, str]] = field(default_factory=list)


def _extract_one(img: AnnotatedImage, parents: Dict[int, AnnotatedImage], image_root: Path, out_root: Path):
    from PIL import Image

    parent = parents[img.provenance.parent_image_id]
    src = image_root / parent.file_name
    c = img.provenance.crop_box
    with Image.open(src) as im:
        im.load()
        left = max(math.floor(c.x1), 0)
        top = max(math.floor(c.y1), 0)
        right = min(math.ceil(c.x2), im.width)
        bottom = min(math.ceil(c.y2), im.height)
        if right <= left or bottom <= top:
            raise GeometryError(f"crop outside image {src}")
        region = im.crop((left, top, right, bottom))
        region = region.resize((img.extent.width, img.extent.height), Image.BILINEAR)
    dst = out_root / img.file_name
    dst.parent.mkdir(parents=True, exist_ok=True)
    region.save(dst)


def extract_crop_rasters(ds: Dataset, image_root, out_root, workers: int = 1) -> ExtractReport:
    """Cut, resize and write every crop image; failures are collected, not raised."""
    image_root, out_root = Path(image_root), Path(out_root)
    parents = ds.image_by_id()
    crops = [img for img in ds.images if img.is_crop]

    def work(img):
        try:
            _extract_one(img, parents, image_root, out_root)
            return None
        except (OSError, ValueError, GeometryError) as exc:
            return (img.file_name, f"{type(exc).__name__}: {exc}")

    report = ExtractReport()
    for failure in jsonio.parallel_map(work, crops, workers, threads=True):
        if failure is None:
            report.written += 1
        else:
            report.failures.append(failure)
    return report
