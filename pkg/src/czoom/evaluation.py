"""
COCO-style box AP.

For every category, area range and IoU threshold, detections are matched
greedily in descending score order to unmatched ground truth, the
precision/recall curve is made monotone and precision is averaged at 101
recall points. Crowd and out-of-range ground truth is matched last and the
detections landing on it are ignored rather than counted.

``evaluate_naive`` re-derives the same numbers with plain loops and is
only meant for cross-checking small instances.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ._backend import kernels
from .errors import CZoomError
from .geometry import Box, Detection, boxes_to_array

AREA_NAMES = ("all", "small", "medium", "large")


@dataclass(frozen=True)
class EvalConfig:
    iou_thresholds: tuple = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
    # small: area < small_area; medium: small_area <= area <= large_area; large: above
    small_area: float = 32.0 ** 2
    large_area: float = 96.0 ** 2
    max_dets: int = 500
    recall_points: tuple = tuple(i / 100 for i in range(101))

    def __post_init__(self):
        t = self.iou_thresholds
        if not t or any(not 0.0 < v < 1.0 for v in t) or any(b <= a for a, b in zip(t, t[1:])):
            raise CZoomError(f"iou_thresholds must be strictly increasing in (0, 1), got {t}")
        if not 0 < self.small_area <= self.large_area:
            raise CZoomError("area thresholds must satisfy 0 < small_area <= large_area")
        if self.max_dets < 1:
            raise CZoomError(f"max_dets must be >= 1, got {self.max_dets}")

    def in_range(self, area_name: str, area):
        area = np.asarray(area, dtype=np.float64)
        if area_name == "all":
            return np.ones(area.shape, dtype=bool)
        if area_name == "small":
            return area < self.small_area
        if area_name == "medium":
            return (area >= self.small_area) & (area <= self.large_area)
        if area_name == "large":
            return area > self.large_area
        raise KeyError(area_name)


@dataclass
class EvalResult:
    ap: float = 0.0
    ap50: float = 0.0
    ap75: float = 0.0
    ap_small: float = 0.0
    ap_medium: float = 0.0
    ap_large: float = 0.0
    per_category: Dict[int, float] = field(default_factory=dict)
    # recall at IoU 0.5 per area range, averaged over categories
    recall50: Dict[str, float] = field(default_factory=dict)
    # AP per (threshold, category, area); NaN where a cell has no ground truth
    table: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    category_ids: List[int] = field(default_factory=list, repr=False, compare=False)

    def headline(self) -> Dict[str, float]:
        return {
            "AP": self.ap, "AP50": self.ap50, "AP75": self.ap75,
            "APs": self.ap_small, "APm": self.ap_medium, "APl": self.ap_large,
        }

    def to_dict(self) -> dict:
        return {
            "metrics": self.headline(),
            "per_category": {str(k): v for k, v in sorted(self.per_category.items())},
            "recall50": dict(self.recall50),
        }

    def format_table(self) -> str:
        head = self.headline()
        names = list(head)
        vals = [f"{100.0 * v:.2f}" for v in head.values()]
        widths = [max(len(n), len(v)) for n, v in zip(names, vals)]
        line1 = "  ".join(n.rjust(w) for n, w in zip(names, widths))
        line2 = "  ".join(v.rjust(w) for v, w in zip(vals, widths))
        return line1 + "\n" + line2


def _mean(values) -> float:
    arr = np.asarray(values, dtype=np.float64)
    arr = arr[~np.isnan(arr)]
    return float(arr.mean()) if arr.size else 0.0


def _summarize(table: np.ndarray, recall: np.ndarray, cat_ids, cfg: EvalConfig) -> EvalResult:
    thr = list(cfg.iou_thresholds)

    def at(t):
        return table[thr.index(t), :, 0] if t in thr else np.full(len(cat_ids), np.nan)

    res = EvalResult(
        ap=_mean(table[:, :, 0]),
        ap50=_mean(at(0.5)),
        ap75=_mean(at(0.75)),
        ap_small=_mean(table[:, :, 1]),
        ap_medium=_mean(table[:, :, 2]),
        ap_large=_mean(table[:, :, 3]),
        per_category={k: _mean(table[:, i, 0]) for i, k in enumerate(cat_ids)},
        table=table,
        category_ids=list(cat_ids),
    )
    t50 = thr.index(0.5) if 0.5 in thr else 0
    res.recall50 = {name: _mean(recall[t50, :, a]) for a, name in enumerate(AREA_NAMES)}
    return res


def _det_key(d: Detection):
    return (-d.score, d.box.x1, d.box.y1, d.box.x2, d.box.y2)


def _group(gt, dets, exclude_category_ids):
    images = [img.id for img in gt.images]
    known = set(images)
    cat_ids = sorted(c.id for c in gt.categories if c.id not in set(exclude_category_ids))
    cats = set(cat_ids)
    gts = defaultdict(list)
    for ann in gt.annotations:
        if ann.category_id in cats:
            gts[ann.image_id, ann.category_id].append(ann)
    dts = defaultdict(list)
    for d in dets:
        if d.image_id not in known:
            raise CZoomError(f"detection references unknown image id {d.image_id!r}")
        if d.category_id in cats:
            dts[d.image_id, d.category_id].append(d)
    return images, cat_ids, gts, dts


def evaluate(gt, dets: Sequence[Detection], cfg: EvalConfig = EvalConfig(),
             exclude_category_ids=()) -> EvalResult:
    images, cat_ids, gts, dts = _group(gt, dets, exclude_category_ids)
    thresholds = np.asarray(cfg.iou_thresholds, dtype=np.float64)
    rec_pts = np.asarray(cfg.recall_points, dtype=np.float64)
    n_t, n_k, n_a = len(thresholds), len(cat_ids), len(AREA_NAMES)
    table = np.full((n_t, n_k, n_a), np.nan)
    recall = np.full((n_t, n_k, n_a), np.nan)

    for k, cat in enumerate(cat_ids):
        scores, tps, ignores = [[] for _ in range(n_a)], [[] for _ in range(n_a)], [[] for _ in range(n_a)]
        npig = np.zeros(n_a, dtype=np.int64)
        for img in images:
            g = gts.get((img, cat), [])
            d = sorted(dts.get((img, cat), []), key=_det_key)[: cfg.max_dets]
            if not g and not d:
                continue
            crowd = np.array([a.iscrowd for a in g], dtype=bool)
            g_area = np.array([a.area for a in g], dtype=np.float64)
            d_area = np.array([x.box.area for x in d], dtype=np.float64)
            d_score = np.array([x.score for x in d], dtype=np.float64)
            ious = kernels.iou_matrix(boxes_to_array(x.box for x in d), boxes_to_array(a.box for a in g), crowd)
            for a, name in enumerate(AREA_NAMES):
                g_ign = crowd | ~cfg.in_range(name, g_area)
                npig[a] += int((~g_ign).sum())
                match, on_ign = kernels.greedy_match(ious, g_ign, crowd, thresholds)
                d_ign = on_ign | ((match < 0) & ~cfg.in_range(name, d_area)[None, :])
                scores[a].append(d_score)
                tps[a].append((match >= 0) & ~d_ign)
                ignores[a].append(d_ign)
        for a in range(n_a):
            if npig[a] == 0:
                continue
            if scores[a]:
                s = np.concatenate(scores[a])
                order = np.argsort(-s, kind="mergesort")
                tp = np.concatenate(tps[a], axis=1)[:, order]
                ign = np.concatenate(ignores[a], axis=1)[:, order]
            else:
                tp = ign = np.zeros((n_t, 0), dtype=bool)
            for t in range(n_t):
                keep = ~ign[t]
                tp_t = tp[t][keep]
                tp_cum = np.cumsum(tp_t, dtype=np.float64)
                fp_cum = np.cumsum(~tp_t, dtype=np.float64)
                if tp_t.size == 0:
                    table[t, k, a] = 0.0
                    recall[t, k, a] = 0.0
                    continue
                rc = tp_cum / npig[a]
                pr = tp_cum / (tp_cum + fp_cum)
                pr = np.maximum.accumulate(pr[::-1])[::-1]
                inds = np.searchsorted(rc, rec_pts, side="left")
                q = np.where(inds < len(pr), pr[np.minimum(inds, len(pr) - 1)], 0.0)
                table[t, k, a] = q.mean()
                recall[t, k, a] = rc[-1]
    return _summarize(table, recall, cat_ids, cfg)


def _naive_iou(d: Box, g: Box, crowd: bool) -> float:
    w = min(d.x2, g.x2) - max(d.x1, g.x1)
    h = min(d.y2, g.y2) - max(d.y1, g.y1)
    if w <= 0 or h <= 0:
        return 0.0
    inter = w * h
    d_area = (d.x2 - d.x1) * (d.y2 - d.y1)
    if crowd:
        return inter / d_area
    g_area = (g.x2 - g.x1) * (g.y2 - g.y1)
    return inter / ((d_area + g_area) - inter)


def evaluate_naive(gt, dets: Sequence[Detection], cfg: EvalConfig = EvalConfig(),
                   exclude_category_ids=()) -> EvalResult:
    """Loop-by-loop re-implementation of :func:`evaluate` used as an oracle."""
    images, cat_ids, gts, dts = _group(gt, dets, exclude_category_ids)
    n_t, n_k, n_a = len(cfg.iou_thresholds), len(cat_ids), len(AREA_NAMES)
    table = np.full((n_t, n_k, n_a), np.nan)
    recall = np.full((n_t, n_k, n_a), np.nan)

    def in_range(name, area):
        return bool(cfg.in_range(name, area))

    for k, cat in enumerate(cat_ids):
        for a, name in enumerate(AREA_NAMES):
            for t, thr in enumerate(cfg.iou_thresholds):
                events = []  # (score, image position, rank, is_tp)
                n_gt = 0
                for pos, img in enumerate(images):
                    g = gts.get((img, cat), [])
                    ignored = [x.iscrowd or not in_range(name, x.area) for x in g]
                    n_gt += sum(1 for i in ignored if not i)
                    d = sorted(dts.get((img, cat), []), key=_det_key)[: cfg.max_dets]
                    used = set()
                    for rank, det in enumerate(d):
                        chosen = None
                        for want_ignored in (False, True):
                            cands = []
                            for gi, ann in enumerate(g):
                                if ignored[gi] != want_ignored:
                                    continue
                                if gi in used and not ann.iscrowd:
                                    continue
                                v = _naive_iou(det.box, ann.box, ann.iscrowd)
                                if v >= thr:
                                    cands.append((-v, gi))
                            if cands:
                                chosen = min(cands)[1]
                                break
                        if chosen is not None:
                            if not g[chosen].iscrowd:
                                used.add(chosen)
                            if ignored[chosen]:
                                continue
                            events.append((det.score, pos, rank, True))
                        elif in_range(name, det.box.area):
                            events.append((det.score, pos, rank, False))
                if n_gt == 0:
                    continue
                events.sort(key=lambda e: (-e[0], e[1], e[2]))
                points = []
                n_tp = n_fp = 0
                for ev in events:
                    if ev[3]:
                        n_tp += 1
                    else:
                        n_fp += 1
                    points.append((n_tp / n_gt, n_tp / (n_tp + n_fp)))
                total = 0.0
                for r in cfg.recall_points:
                    total += max((p for rc, p in points if rc >= r), default=0.0)
                table[t, k, a] = total / len(cfg.recall_points)
                recall[t, k, a] = points[-1][0] if points else 0.0
    return _summarize(table, recall, cat_ids, cfg)


@dataclass
class OracleReport:
    max_abs_deviation: float
    fast: EvalResult
    naive: EvalResult


def evaluate_against_oracle(gt, dets: Sequence[Detection], cfg: EvalConfig = EvalConfig(),
                            exclude_category_ids=()) -> OracleReport:
    fast = evaluate(gt, dets, cfg, exclude_category_ids)
    naive = evaluate_naive(gt, dets, cfg, exclude_category_ids)
    dev = 0.0
    nan_f, nan_n = np.isnan(fast.table), np.isnan(naive.table)
    if (nan_f != nan_n).any():
        dev = math.inf
    elif fast.table.size:
        dev = float(np.abs(np.nan_to_num(fast.table) - np.nan_to_num(naive.table)).max())
    for key, v in fast.headline().items():
        dev = max(dev, abs(v - naive.headline()[key]))
    return OracleReport(dev, fast, naive)
