# Compiled twin of _kernels_py.py. Arithmetic order is kept identical so the
# two backends agree bit for bit.
import numpy as np
cimport numpy as cnp

cnp.import_array()

NAME = "cython"


cdef inline double _inter(double ax1, double ay1, double ax2, double ay2,
                          double bx1, double by1, double bx2, double by2) nogil:
    cdef double iw = (ax2 if ax2 < bx2 else bx2) - (ax1 if ax1 > bx1 else bx1)
    cdef double ih = (ay2 if ay2 < by2 else by2) - (ay1 if ay1 > by1 else by1)
    if iw < 0.0:
        iw = 0.0
    if ih < 0.0:
        ih = 0.0
    return iw * ih


def _as_boxes(boxes):
    return np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)


def iou_matrix(a, b, crowd=None):
    cdef double[:, ::1] A = _as_boxes(a)
    cdef double[:, ::1] B = _as_boxes(b)
    cdef Py_ssize_t n = A.shape[0], m = B.shape[0], i, j
    out = np.zeros((n, m))
    if n == 0 or m == 0:
        return out
    cdef double[:, ::1] O = out
    cdef cnp.uint8_t[::1] CR
    cdef bint has_crowd = crowd is not None
    if has_crowd:
        CR = np.ascontiguousarray(crowd, dtype=np.uint8)
    cdef double area_a, area_b, inter, denom
    with nogil:
        for i in range(n):
            area_a = (A[i, 2] - A[i, 0]) * (A[i, 3] - A[i, 1])
            for j in range(m):
                area_b = (B[j, 2] - B[j, 0]) * (B[j, 3] - B[j, 1])
                inter = _inter(A[i, 0], A[i, 1], A[i, 2], A[i, 3],
                               B[j, 0], B[j, 1], B[j, 2], B[j, 3])
                if has_crowd and CR[j]:
                    denom = area_a
                else:
                    denom = (area_a + area_b) - inter
                O[i, j] = inter / denom
    return out


def pairwise_iou(boxes):
    return iou_matrix(boxes, boxes)


def nms_keep(boxes, order, labels, double thr):
    cdef double[:, ::1] B = _as_boxes(boxes)
    cdef Py_ssize_t[::1] ORD = np.ascontiguousarray(order, dtype=np.intp)
    cdef cnp.int64_t[::1] L = np.ascontiguousarray(labels, dtype=np.int64)
    cdef Py_ssize_t n = ORD.shape[0], ii, jj, i, j, k = 0
    cdef cnp.uint8_t[::1] sup = np.zeros(B.shape[0], dtype=np.uint8)
    keep_arr = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] keep = keep_arr
    cdef double area_i, area_j, inter
    with nogil:
        for ii in range(n):
            i = ORD[ii]
            if sup[i]:
                continue
            keep[k] = i
            k += 1
            area_i = (B[i, 2] - B[i, 0]) * (B[i, 3] - B[i, 1])
            for jj in range(ii + 1, n):
                j = ORD[jj]
                if sup[j] or L[j] != L[i]:
                    continue
                area_j = (B[j, 2] - B[j, 0]) * (B[j, 3] - B[j, 1])
                inter = _inter(B[i, 0], B[i, 1], B[i, 2], B[i, 3],
                               B[j, 0], B[j, 1], B[j, 2], B[j, 3])
                if inter / ((area_i + area_j) - inter) > thr:
                    sup[j] = 1
    return keep_arr[:k].copy()


def star_cover(conn, int min_degree):
    c_arr = np.array(conn, dtype=np.uint8, copy=True)
    cdef Py_ssize_t n = c_arr.shape[0] if c_arr.ndim == 2 else 0
    groups = []
    if n == 0:
        return groups
    cdef cnp.uint8_t[:, ::1] C = c_arr
    deg_arr = c_arr.sum(axis=1).astype(np.int64)
    cdef cnp.int64_t[::1] deg = deg_arr
    cdef Py_ssize_t i, j, best, k
    cdef cnp.int64_t bestdeg
    cdef int need = min_degree if min_degree > 1 else 1
    while True:
        best = 0
        bestdeg = deg[0]
        for i in range(1, n):
            if deg[i] > bestdeg:
                best = i
                bestdeg = deg[i]
        if bestdeg < need:
            break
        members = [best]
        for j in range(n):
            if C[best, j]:
                members.append(j)
        for k in members:
            for j in range(n):
                if C[k, j]:
                    C[k, j] = 0
                    deg[k] -= 1
                if C[j, k]:
                    C[j, k] = 0
                    deg[j] -= 1
        groups.append(members)
    return groups


def greedy_match(ious, gt_ignore, gt_crowd, thresholds):
    iou_arr = np.ascontiguousarray(ious, dtype=np.float64)
    cdef Py_ssize_t n_d = iou_arr.shape[0] if iou_arr.ndim == 2 else 0
    cdef Py_ssize_t n_g = iou_arr.shape[1] if iou_arr.ndim == 2 else 0
    cdef double[::1] T = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef Py_ssize_t n_t = T.shape[0]
    match_arr = np.full((n_t, n_d), -1, dtype=np.intp)
    ign_arr = np.zeros((n_t, n_d), dtype=bool)
    if n_d == 0 or n_t == 0:
        return match_arr, ign_arr
    iou_arr = iou_arr.reshape(n_d, n_g)
    cdef double[:, ::1] I = iou_arr
    cdef cnp.uint8_t[::1] IG = np.ascontiguousarray(gt_ignore, dtype=np.uint8)
    cdef cnp.uint8_t[::1] CR = np.ascontiguousarray(gt_crowd, dtype=np.uint8)
    cdef Py_ssize_t[:, ::1] M = match_arr
    cdef cnp.uint8_t[:, ::1] ON = ign_arr.view(np.uint8)
    cdef cnp.uint8_t[::1] taken = np.zeros(n_g, dtype=np.uint8)
    cdef Py_ssize_t t, d, g, best
    cdef int pass_
    cdef double thr, v, best_iou
    with nogil:
        for t in range(n_t):
            thr = T[t]
            for g in range(n_g):
                taken[g] = 0
            for d in range(n_d):
                best = -1
                best_iou = 0.0
                for pass_ in range(2):
                    for g in range(n_g):
                        if IG[g] != pass_:
                            continue
                        if taken[g] and not CR[g]:
                            continue
                        v = I[d, g]
                        if v >= thr and (best < 0 or v > best_iou):
                            best = g
                            best_iou = v
                    if best >= 0:
                        break
                if best >= 0:
                    M[t, d] = best
                    ON[t, d] = IG[best]
                    if not CR[best]:
                        taken[best] = 1
    return match_arr, ign_arr
