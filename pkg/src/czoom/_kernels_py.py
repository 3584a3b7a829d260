"""Pure-Python/numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` operation for operation so both backends
produce bitwise-identical floats. Boxes are ``(n, 4)`` float64 arrays in
corner form ``x1, y1, x2, y2``.
"""
import numpy as np

NAME = "python"


def _as_boxes(boxes):
    return np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)


def iou_matrix(a, b, crowd=None):
    """IoU between every row of ``a`` and every row of ``b``.

    Where ``crowd[j]`` is set the denominator is the area of the ``a`` box
    instead of the union (COCO crowd convention).
    """
    a = _as_boxes(a)
    b = _as_boxes(b)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.maximum(iw, 0.0) * np.maximum(ih, 0.0)
    denom = (area_a[:, None] + area_b[None, :]) - inter
    if crowd is not None:
        crowd = np.asarray(crowd, dtype=bool)
        denom = np.where(crowd[None, :], area_a[:, None], denom)
    return inter / denom


def pairwise_iou(boxes):
    return iou_matrix(boxes, boxes)


def nms_keep(boxes, order, labels, thr):
    """Greedy suppression; returns kept indices in visiting order.

    ``order`` is the priority order (highest score first). A box is dropped
    when its IoU with an already kept box of the same label exceeds ``thr``.
    """
    boxes = _as_boxes(boxes)
    order = np.asarray(order, dtype=np.intp)
    labels = np.asarray(labels, dtype=np.int64)
    n = len(order)
    suppressed = np.zeros(len(boxes), dtype=bool)
    keep = []
    for ii in range(n):
        i = order[ii]
        if suppressed[i]:
            continue
        keep.append(i)
        rest = order[ii + 1:]
        rest = rest[~suppressed[rest] & (labels[rest] == labels[i])]
        if len(rest) == 0:
            continue
        ious = iou_matrix(boxes[i:i + 1], boxes[rest])[0]
        suppressed[rest[ious > thr]] = True
    return np.asarray(keep, dtype=np.intp)


def star_cover(conn, min_degree):
    """Greedy max-degree star decomposition of a boolean adjacency matrix.

    Repeatedly takes the row with the most set entries (lowest index on
    ties) while that count is at least ``max(min_degree, 1)``; the group is
    the row plus its neighbours, whose rows and columns are then cleared.
    Returns a list of groups, centre first and neighbours ascending.
    """
    c = np.array(conn, dtype=bool, copy=True)
    n = c.shape[0]
    groups = []
    if n == 0:
        return groups
    deg = c.sum(axis=1)
    need = max(int(min_degree), 1)
    while True:
        best = int(np.argmax(deg))
        if deg[best] < need:
            break
        members = [best] + [int(j) for j in np.flatnonzero(c[best])]
        idx = np.asarray(members)
        c[idx, :] = False
        c[:, idx] = False
        deg = c.sum(axis=1)
        groups.append(members)
    return groups


def greedy_match(ious, gt_ignore, gt_crowd, thresholds):
    """Match score-sorted detections to ground truth at each threshold.

    For each detection in row order the unmatched regular GT with the
    highest IoU >= threshold wins (lowest index on ties); failing that, an
    ignored GT is tried the same way. Crowd GT may absorb any number of
    detections. Returns ``(match, on_ignored)`` of shape ``(T, D)``.
    """
    ious = np.asarray(ious, dtype=np.float64)
    gt_ignore = np.asarray(gt_ignore, dtype=bool)
    gt_crowd = np.asarray(gt_crowd, dtype=bool)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    n_t = len(thresholds)
    n_d, n_g = ious.shape if ious.ndim == 2 else (0, 0)
    match = np.full((n_t, n_d), -1, dtype=np.intp)
    on_ignored = np.zeros((n_t, n_d), dtype=bool)
    for t in range(n_t):
        thr = thresholds[t]
        taken = np.zeros(n_g, dtype=bool)
        for d in range(n_d):
            best = -1
            best_iou = 0.0
            for want_ignored in (False, True):
                for g in range(n_g):
                    if gt_ignore[g] != want_ignored:
                        continue
                    if taken[g] and not gt_crowd[g]:
                        continue
                    v = ious[d, g]
                    if v >= thr and (best < 0 or v > best_iou):
                        best = g
                        best_iou = v
                if best >= 0:
                    break
            if best >= 0:
                match[t, d] = best
                on_ignored[t, d] = gt_ignore[best]
                if not gt_crowd[best]:
                    taken[best] = True
    return match, on_ignored
