"""Independent reference implementations used only by the tests.

Nothing here imports the kernels; geometry is plain tuples.
"""
import itertools

import networkx as nx


def ref_iou(a, b):
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    inter = max(iw, 0.0) * max(ih, 0.0)
    area_a = (a[2] - a[0]) * (a[3] - a[1])
    area_b = (b[2] - b[0]) * (b[3] - b[1])
    return inter / ((area_a + area_b) - inter)


def ref_star_cover(adjacency, min_degree=1):
    """Max-degree star peeling on a networkx graph (lowest node wins ties)."""
    n = len(adjacency)
    g = nx.Graph()
    g.add_nodes_from(range(n))
    for i, j in itertools.combinations(range(n), 2):
        if adjacency[i][j]:
            g.add_edge(i, j)
    groups = []
    while g.number_of_nodes():
        deg, neg = max((g.degree(v), -v) for v in g.nodes)
        if deg < max(min_degree, 1):
            break
        v = -neg
        group = [v] + sorted(g.neighbors(v))
        groups.append(group)
        g.remove_nodes_from(group)
    return groups


def ref_label_crops(gt, width, height, n_steps=2, sigma=20.0, theta=0.1, pi=0.3, min_members=2):
    """Density crop labeling on tuples; returns [(x1, y1, x2, y2), member_count]."""
    items = [((x1 - sigma, y1 - sigma, x2 + sigma, y2 + sigma), 1, True) for x1, y1, x2, y2 in gt]
    for _ in range(n_steps):
        adj = [[i != j and ref_iou(a[0], b[0]) > theta for j, b in enumerate(items)] for i, a in enumerate(items)]
        new, used = [], set()
        for group in ref_star_cover(adj, min_members - 1):
            used.update(group)
            boxes = [items[k][0] for k in group]
            enc = (min(b[0] for b in boxes), min(b[1] for b in boxes), max(b[2] for b in boxes), max(b[3] for b in boxes))
            new.append((enc, sum(items[k][1] for k in group), False))
        new += [it for k, it in enumerate(items) if k not in used and not it[2]]
        items = [it for it in new if (it[0][2] - it[0][0]) * (it[0][3] - it[0][1]) / (width * height) <= pi]
    out = []
    for (x1, y1, x2, y2), count, _ in items:
        out.append(((max(x1, 0.0), max(y1, 0.0), min(x2, float(width)), min(y2, float(height))), count))
    return out


def ref_nms(boxes, scores, labels, thr):
    """Exhaustive O(n^2) suppression: full IoU matrix first, then one pass in priority order."""
    n = len(boxes)
    ious = [[ref_iou(boxes[i], boxes[j]) for j in range(n)] for i in range(n)]
    prio = sorted(range(n), key=lambda i: (-scores[i], i))
    rank = {i: r for r, i in enumerate(prio)}
    kept = []
    for i in prio:
        if not any(labels[j] == labels[i] and ious[i][j] > thr for j in kept if rank[j] < rank[i]):
            kept.append(i)
    return kept


def nms_fixed_point(boxes, scores, labels, thr, subset):
    """True if ``subset`` is exactly the set of boxes not suppressed by a higher-priority member of it."""
    prio = sorted(range(len(boxes)), key=lambda i: (-scores[i], i))
    rank = {i: r for r, i in enumerate(prio)}
    for i in range(len(boxes)):
        blocked = any(
            j in subset and rank[j] < rank[i] and labels[j] == labels[i] and ref_iou(boxes[i], boxes[j]) > thr
            for j in range(len(boxes))
        )
        if (i in subset) == blocked:
            return False
    return True
