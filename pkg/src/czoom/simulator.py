"""
Synthetic crowded scenes and a GT-driven mock detector.

The mock detector never looks at pixels. It decides per object whether it is
found from the object's *apparent size*, the shorter side in pixels after
the view is resized for the detector: full images are squeezed to
``processing_resolution`` on their shorter edge, crops are blown up to their
work-order extent. Small objects that vanish in the full pass therefore
reappear in the crop pass, which is what the two-stage pipeline relies on.

All randomness flows from ``numpy.random.SeedSequence`` keyed on
``(seed, image index, stream)`` so results do not depend on execution order.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .crop_labeling import CropLabelConfig, DensityCrop, label_crops
from .dataset import AnnotatedImage, Annotation, Category, Dataset
from .errors import SceneError
from .evaluation import EvalConfig, EvalResult, evaluate
from .fusion import CropWorkOrder, FusionConfig, fuse, select_crops
from .geometry import Box, Detection, ImageExtent, nms

CROP_CATEGORY_ID = 0

_STREAM_SCENE = 0
_STREAM_STAGE1 = 1
_STREAM_STAGE2 = 2


@dataclass(frozen=True)
class SceneConfig:
    width: int = 1920
    height: int = 1080
    n_clusters: int = 4
    objects_per_cluster: Tuple[int, int] = (6, 16)
    object_size: Tuple[float, float] = (8.0, 32.0)
    cluster_spread: float = 120.0
    n_singletons: int = 10
    singleton_size: Tuple[float, float] = (16.0, 120.0)
    n_categories: int = 3
    seed: int = 0
    max_retries: int = 1000

    def __post_init__(self):
        if self.n_clusters < 0 or self.n_singletons < 0 or min(self.objects_per_cluster) < 0:
            raise SceneError("object and cluster counts must be >= 0")
        if self.objects_per_cluster[0] > self.objects_per_cluster[1]:
            raise SceneError("objects_per_cluster must be a (low, high) range")
        for lo, hi in (self.object_size, self.singleton_size):
            if not 0 < lo <= hi:
                raise SceneError("sizes must be positive (low, high) ranges")
        if self.n_categories < 1:
            raise SceneError("n_categories must be >= 1")
        if self.cluster_spread < 0:
            raise SceneError("cluster_spread must be >= 0")

    @property
    def extent(self) -> ImageExtent:
        return ImageExtent(self.width, self.height)


@dataclass(frozen=True)
class MockDetectorConfig:
    processing_resolution: int = 800
    # (apparent size, detection probability) knots; linear in between, flat outside
    miss_curve: Tuple[Tuple[float, float], ...] = ((10.0, 0.0), (20.0, 1.0))
    localization_noise: float = 0.05
    score_range: Tuple[float, float] = (0.3, 1.0)
    false_positive_rate: float = 2.0
    false_positive_score_range: Tuple[float, float] = (0.05, 0.5)
    crop_detection_probability: float = 0.9
    crop_score_range: Tuple[float, float] = (0.6, 1.0)
    seed: int = 0

    def __post_init__(self):
        if self.processing_resolution < 1:
            raise SceneError("processing_resolution must be >= 1")
        if not self.miss_curve:
            raise SceneError("miss_curve needs at least one knot")
        sizes = [s for s, _ in self.miss_curve]
        probs = [p for _, p in self.miss_curve]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise SceneError("miss_curve sizes must be strictly increasing")
        if any(not 0.0 <= p <= 1.0 for p in probs) or any(b < a for a, b in zip(probs, probs[1:])):
            raise SceneError("miss_curve probabilities must lie in [0, 1] and be non-decreasing")
        if self.localization_noise < 0 or self.false_positive_rate < 0:
            raise SceneError("noise and false-positive rate must be >= 0")
        if not 0.0 <= self.crop_detection_probability <= 1.0:
            raise SceneError("crop_detection_probability must lie in [0, 1]")
        for lo, hi in (self.score_range, self.false_positive_score_range, self.crop_score_range):
            if not 0.0 <= lo <= hi <= 1.0:
                raise SceneError("score ranges must satisfy 0 <= low <= high <= 1")

    def detection_probability(self, apparent_size: float) -> float:
        sizes = [s for s, _ in self.miss_curve]
        probs = [p for _, p in self.miss_curve]
        return float(np.interp(apparent_size, sizes, probs))


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def _place_box(rng, cx, cy, w, h, ext: ImageExtent) -> Box:
    w = min(w, ext.width)
    h = min(h, ext.height)
    x1 = float(np.clip(cx - w / 2.0, 0.0, ext.width - w))
    y1 = float(np.clip(cy - h / 2.0, 0.0, ext.height - h))
    return Box(x1, y1, x1 + w, y1 + h)


def generate_scene(cfg: SceneConfig, image_id: int = 1,
                   rng: Optional[np.random.Generator] = None) -> Tuple[AnnotatedImage, List[Annotation]]:
    """One synthetic image with clustered small objects and scattered singletons."""
    rng = rng if rng is not None else _rng(cfg.seed, _STREAM_SCENE)
    ext = cfg.extent
    margin = cfg.cluster_spread + cfg.object_size[1] / 2.0
    min_sep = 2.0 * (cfg.cluster_spread + cfg.object_size[1])
    centers = []
    for _ in range(cfg.n_clusters):
        for _ in range(cfg.max_retries):
            lo_x, hi_x = margin, ext.width - margin
            lo_y, hi_y = margin, ext.height - margin
            if hi_x < lo_x or hi_y < lo_y:
                break
            c = (rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y))
            if all((c[0] - o[0]) ** 2 + (c[1] - o[1]) ** 2 >= min_sep ** 2 for o in centers):
                centers.append(c)
                break
        else:
            raise SceneError("cannot place clusters")
    if len(centers) != cfg.n_clusters:
        raise SceneError("cannot place clusters")

    boxes, cats = [], []
    for cx, cy in centers:
        n = int(rng.integers(cfg.objects_per_cluster[0], cfg.objects_per_cluster[1] + 1))
        for _ in range(n):
            ox = cx + rng.uniform(-cfg.cluster_spread, cfg.cluster_spread)
            oy = cy + rng.uniform(-cfg.cluster_spread, cfg.cluster_spread)
            w, h = rng.uniform(*cfg.object_size, size=2)
            boxes.append(_place_box(rng, ox, oy, w, h, ext))
            cats.append(int(rng.integers(1, cfg.n_categories + 1)))
    for _ in range(cfg.n_singletons):
        w, h = rng.uniform(*cfg.singleton_size, size=2)
        ox, oy = rng.uniform(0, ext.width), rng.uniform(0, ext.height)
        boxes.append(_place_box(rng, ox, oy, w, h, ext))
        cats.append(int(rng.integers(1, cfg.n_categories + 1)))

    image = AnnotatedImage(image_id, f"synthetic_{image_id:06d}.png", ext)
    anns = [
        Annotation(image_id * 100000 + i, image_id, c, b, b.area)
        for i, (b, c) in enumerate(zip(boxes, cats))
    ]
    return image, anns


def generate_corpus(cfg: SceneConfig = SceneConfig(), n_images: int = 200, seed: int = 42) -> Dataset:
    """``n_images`` scenes as one dataset; image ``i`` uses the same stream as in the pipeline experiment."""
    images, anns = [], []
    for i in range(n_images):
        image, gt = generate_scene(cfg, i + 1, rng=_rng(seed, i, _STREAM_SCENE))
        images.append(image)
        anns.extend(gt)
    return Dataset(images, anns, _categories(cfg))


def _categories(cfg: SceneConfig) -> List[Category]:
    return [Category(c, f"class_{c}") for c in range(1, cfg.n_categories + 1)]


def apparent_size(box: Box, ext: ImageExtent, view: Union[str, CropWorkOrder], cfg: MockDetectorConfig) -> float:
    """Shorter side of ``box`` in the pixels the detector actually sees."""
    side = min(box.width, box.height)
    if isinstance(view, CropWorkOrder):
        c = view.crop_box
        return side * min(view.extent.width / c.width, view.extent.height / c.height)
    return side * cfg.processing_resolution / ext.shorter_edge


def _jitter(rng, box: Box, noise: float, bounds: Box) -> Optional[Box]:
    if noise > 0:
        dx = rng.normal(0.0, noise * box.width, size=2)
        dy = rng.normal(0.0, noise * box.height, size=2)
        x1, x2 = box.x1 + dx[0], box.x2 + dx[1]
        y1, y2 = box.y1 + dy[0], box.y2 + dy[1]
    else:
        x1, y1, x2, y2 = box.as_tuple()
    x1, x2 = max(x1, bounds.x1), min(x2, bounds.x2)
    y1, y2 = max(y1, bounds.y1), min(y2, bounds.y2)
    if x2 <= x1 or y2 <= y1:
        return None
    return Box(float(x1), float(y1), float(x2), float(y2))


def mock_detect(image_gt: Sequence[Annotation], ext: ImageExtent, view: Union[str, CropWorkOrder],
                cfg: MockDetectorConfig, crops: Sequence[DensityCrop] = (), crop_category_id: int = CROP_CATEGORY_ID,
                seed=None, image_id=None) -> List[Detection]:
    """Simulated detections for one view of an image.

    ``view`` is ``"full"`` or a :class:`CropWorkOrder`; crop-view boxes are in
    the upscaled crop's pixel frame. ``crops`` are emitted as crop-class
    detections in the full view only. ``seed`` defaults to ``cfg.seed``.
    """
    ss = np.random.SeedSequence(cfg.seed if seed is None else seed)
    obj_rng, fp_rng, crop_rng = (np.random.default_rng(s) for s in ss.spawn(3))
    full = not isinstance(view, CropWorkOrder)
    if image_id is None:
        image_id = image_gt[0].image_id if image_gt else (view.image_id if not full else None)
    if full:
        region = ext.as_box()
        bounds = region
        sx = sy = 1.0
    else:
        region = view.crop_box
        bounds = view.extent.as_box()
        sx = view.extent.width / region.width
        sy = view.extent.height / region.height

    def to_view(b: Box) -> Box:
        if full:
            return b
        return Box((b.x1 - region.x1) * sx, (b.y1 - region.y1) * sy, (b.x2 - region.x1) * sx, (b.y2 - region.y1) * sy)

    dets = []
    visible = [a for a in image_gt if region.contains_point(*a.box.center)]
    for ann in visible:
        p = cfg.detection_probability(apparent_size(ann.box, ext, view, cfg))
        u = obj_rng.random()
        score = obj_rng.uniform(*cfg.score_range)
        if u >= p:
            continue
        box = _jitter(obj_rng, to_view(ann.box), cfg.localization_noise, bounds)
        if box is not None:
            dets.append(Detection(image_id, ann.category_id, box, float(score)))

    n_fp = int(fp_rng.poisson(cfg.false_positive_rate)) if cfg.false_positive_rate > 0 else 0
    for _ in range(n_fp):
        if image_gt:
            proto = image_gt[int(fp_rng.integers(len(image_gt)))]
            w, h = proto.box.width * sx, proto.box.height * sy
            cat = proto.category_id
        else:
            w = h = 16.0 * sx
            cat = 1
        w, h = min(w, bounds.width), min(h, bounds.height)
        x1 = fp_rng.uniform(0.0, bounds.width - w)
        y1 = fp_rng.uniform(0.0, bounds.height - h)
        score = fp_rng.uniform(*cfg.false_positive_score_range)
        if w > 0 and h > 0:
            dets.append(Detection(image_id, cat, Box(float(x1), float(y1), float(x1 + w), float(y1 + h)), float(score)))

    if full:
        for crop in crops:
            u = crop_rng.random()
            score = crop_rng.uniform(*cfg.crop_score_range)
            if u >= cfg.crop_detection_probability:
                continue
            box = _jitter(crop_rng, crop.box, cfg.localization_noise, bounds)
            if box is not None:
                dets.append(Detection(image_id, crop_category_id, box, float(score)))
    return dets


@dataclass
class ExperimentResult:
    baseline: EvalResult
    fused: EvalResult
    n_images: int
    n_gt_crops: int
    n_selected_crops: int
    baseline_detections: List[Detection] = field(default_factory=list, repr=False)
    fused_detections: List[Detection] = field(default_factory=list, repr=False)

    def recall_table(self) -> Dict[str, Dict[str, float]]:
        return {
            name: {"baseline": self.baseline.recall50[name], "fused": self.fused.recall50[name]}
            for name in self.baseline.recall50
        }

    def to_dict(self) -> dict:
        return {
            "n_images": self.n_images,
            "n_gt_crops": self.n_gt_crops,
            "n_selected_crops": self.n_selected_crops,
            "baseline": self.baseline.to_dict(),
            "fused": self.fused.to_dict(),
            "recall50": self.recall_table(),
        }

    def recall_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["area", "baseline_recall50", "fused_recall50"])
        for name, row in self.recall_table().items():
            writer.writerow([name, f"{row['baseline']:.6f}", f"{row['fused']:.6f}"])
        return buf.getvalue()


def _simulate_image(index: int, scene_cfg: SceneConfig, det_cfg: MockDetectorConfig,
                    crop_cfg: CropLabelConfig, fusion_cfg: FusionConfig, seed: int, scene=None):
    if scene is None:
        scene = generate_scene(scene_cfg, index + 1, rng=_rng(seed, index, _STREAM_SCENE))
    image, gt = scene
    image_id = image.id
    ext = image.extent
    crops = label_crops([a.box for a in gt], ext, crop_cfg, image_id=image_id)
    stage1 = mock_detect(gt, ext, "full", det_cfg, crops, fusion_cfg.crop_category_id,
                         seed=[det_cfg.seed, seed, index, _STREAM_STAGE1], image_id=image_id)
    orders = select_crops(stage1, fusion_cfg, ext)
    stage2 = [
        (order, mock_detect(gt, ext, order, det_cfg, seed=[det_cfg.seed, seed, index, _STREAM_STAGE2, k],
                            image_id=image_id))
        for k, order in enumerate(orders)
    ]
    baseline = nms([d for d in stage1 if d.category_id != fusion_cfg.crop_category_id], fusion_cfg.final_nms_iou)
    fused = fuse(stage1, stage2, fusion_cfg)
    return image, gt, len(crops), len(orders), baseline, fused


def run_pipeline_experiment(scene_cfg: SceneConfig = SceneConfig(), det_cfg: MockDetectorConfig = MockDetectorConfig(),
                            crop_cfg: CropLabelConfig = CropLabelConfig(), fusion_cfg: Optional[FusionConfig] = None,
                            n_images: int = 200, seed: int = 42, eval_cfg: EvalConfig = EvalConfig(),
                            scenes: Optional[Sequence[Tuple[AnnotatedImage, List[Annotation]]]] = None
                            ) -> ExperimentResult:
    """Simulate ``n_images`` scenes and evaluate single-pass vs two-stage output.

    ``scenes`` replaces the generated scenes with fixed (image, annotations)
    pairs; ``n_images`` is then ignored and ``scene_cfg`` only supplies the
    category count.
    """
    if fusion_cfg is None:
        fusion_cfg = FusionConfig(crop_category_id=CROP_CATEGORY_ID)
    if scenes is not None:
        n_images = len(scenes)
    images, anns, base_all, fused_all = [], [], [], []
    n_crops = n_orders = 0
    for i in range(n_images):
        scene = scenes[i] if scenes is not None else None
        image, gt, nc, no, baseline, fused = _simulate_image(i, scene_cfg, det_cfg, crop_cfg, fusion_cfg, seed, scene)
        images.append(image)
        anns.extend(gt)
        base_all.extend(baseline)
        fused_all.extend(fused)
        n_crops += nc
        n_orders += no
    gt_ds = Dataset(images, anns, _categories(scene_cfg))
    return ExperimentResult(
        baseline=evaluate(gt_ds, base_all, eval_cfg),
        fused=evaluate(gt_ds, fused_all, eval_cfg),
        n_images=n_images,
        n_gt_crops=n_crops,
        n_selected_crops=n_orders,
        baseline_detections=base_all,
        fused_detections=fused_all,
    )
